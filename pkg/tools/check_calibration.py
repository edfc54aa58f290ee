#!/usr/bin/env python3
"""
Soft calibration gate for the Business As Usual pathway.

Runs BAU at nominal parameters over 2015-2100 and checks the qualitative SSP2 shape:
population rising then flattening, GWP increasing every year, atmospheric CO2 rising.
Milestone values are printed next to SSP2-4.5 corridors for manual review; corridors are
advisory and do not fail the gate unless --strict is given.

Usage:
  python tools/check_calibration.py
  python tools/check_calibration.py --pathway pathways/bau.json --strict
"""

from __future__ import annotations

import argparse
from pathlib import Path
import sys
from typing import Callable, Dict, List, Tuple

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from engine import Trajectory, run  # noqa: E402
from scenarios import REFERENCE_PATHWAY, apply_pathway, resolve_pathway  # noqa: E402
from sectors import WORLD_OUTPUTS, compile_world, load_registry  # noqa: E402


# (variable, year) -> (low, high)
CORRIDORS: Dict[Tuple[str, int], Tuple[float, float]] = {
    ("population.total", 2050): (8.8e9, 10.2e9),
    ("population.total", 2100): (8.0e9, 10.5e9),
    ("carbon.atmospheric_ppm", 2050): (480.0, 560.0),
    ("carbon.atmospheric_ppm", 2100): (520.0, 660.0),
    ("climate.temperature", 2100): (2.2, 3.4),
    ("energy.renewable_share", 2050): (0.15, 0.45),
}


def _population_flattens(traj: Trajectory) -> bool:
    pop = traj["population.total"]
    early = pop[traj.grid.index_of(2035)] - pop[0]
    late = pop[-1] - pop[traj.grid.index_of(2080)]
    return bool(early > 0 and late < early)


def _gwp_increasing(traj: Trajectory) -> bool:
    return bool(np.all(np.diff(traj["economy.gwp"]) > 0))


def _co2_rising(traj: Trajectory) -> bool:
    ppm = traj["carbon.atmospheric_ppm"]
    return bool(ppm[-1] > ppm[traj.grid.index_of(2050)] > ppm[0])


SHAPE_CHECKS: List[Tuple[str, Callable[[Trajectory], bool]]] = [
    ("population rises then flattens", _population_flattens),
    ("GWP increases every year", _gwp_increasing),
    ("atmospheric CO2 rises", _co2_rising),
]


def main() -> int:
    parser = argparse.ArgumentParser(description="Check the qualitative BAU projection shape.")
    parser.add_argument("--pathway", default=REFERENCE_PATHWAY, help="Pathway id or file (default BAU)")
    parser.add_argument("--strict", action="store_true", help="Fail on corridor misses too")
    args = parser.parse_args()

    registry = load_registry()
    spec = resolve_pathway(args.pathway, registry)
    traj = run(compile_world(apply_pathway(registry.nominal_set(), spec)), record=list(WORLD_OUTPUTS))

    failed = 0
    print(f"Calibration gate: {spec.id} ({spec.label})")
    for label, check in SHAPE_CHECKS:
        ok = check(traj)
        failed += not ok
        print(f"  [{'PASS' if ok else 'FAIL'}] {label}")

    misses = 0
    for (variable, year), (low, high) in CORRIDORS.items():
        value = traj.at(variable, year)
        inside = low <= value <= high
        misses += not inside
        print(f"  [{'ok  ' if inside else 'MISS'}] {variable} {year}: {value:.4g} (corridor {low:.4g}-{high:.4g})")

    if failed or (args.strict and misses):
        print(f"Gate failed: {failed} shape check(s), {misses} corridor miss(es).")
        return 1
    print("Gate passed.")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
