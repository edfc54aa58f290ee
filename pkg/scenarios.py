"""
scenarios.py - the five SSP-RCP pathways as validated parameter overrides with uncertainty ranges.

Pathway files are JSON documents under pathways/:

    {
      "meta": {"id": "GreenRecovery", "label": "SSP1-2.6", "title": "...", "non_co2_forcing": "forcing/rcp26.csv"},
      "overrides": {"fertility.scale": 0.85, ...},
      "uncertainty": [{"parameter": "climate.sensitivity", "low": 0.6, "high": 1.1, "distribution": "uniform"}, ...]
    }
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from engine import Knots
from errors import BadLabel, DuplicateName, OutOfRange, ParseError, UnknownParameter
from sectors import ParameterRegistry, ParameterSet, load_registry, read_table_csv
from settings import DATA_DIR, PATHWAYS_DIR


logger = logging.getLogger(__name__)

PATHWAY_LABELS: Dict[str, str] = {
    "BAU": "SSP2-4.5",
    "GreenRecovery": "SSP1-2.6",
    "FragmentedWorld": "SSP3-7.0",
    "Inequality": "SSP4-6.0",
    "FossilFueled": "SSP5-8.5",
}

PATHWAY_FILES: Dict[str, str] = {
    "BAU": "bau.json",
    "GreenRecovery": "green_recovery.json",
    "FragmentedWorld": "fragmented_world.json",
    "Inequality": "inequality.json",
    "FossilFueled": "fossil_fueled.json",
}

REFERENCE_PATHWAY = "BAU"

# registry groups a pathway may override
OVERRIDE_GROUPS = frozenset({"demography", "energy", "diet", "land", "climate_policy"})

FORCING_PARAMETER = "climate.non_co2_forcing"
DISTRIBUTIONS = ("uniform",)


@dataclass(frozen=True)
class ParameterRange:
    parameter: str
    low: float
    high: float
    distribution: str = "uniform"

    @property
    def width(self) -> float:
        return self.high - self.low

    def scale(self, unit: Any) -> Any:
        """Map unit-interval coordinates onto [low, high]."""
        return self.low + unit * (self.high - self.low)

    def to_dict(self) -> Dict[str, Any]:
        return {"parameter": self.parameter, "low": self.low, "high": self.high, "distribution": self.distribution}


@dataclass(frozen=True)
class PathwaySpec:
    id: str
    label: str
    title: str = ""
    overrides: Mapping[str, float] = field(default_factory=dict)
    uncertainty: Tuple[ParameterRange, ...] = ()
    non_co2_forcing: Optional[str] = None
    forcing: Optional[Knots] = None

    @property
    def uncertain_parameters(self) -> List[str]:
        return [r.parameter for r in self.uncertainty]

    def to_dict(self) -> Dict[str, Any]:
        meta: Dict[str, Any] = {"id": self.id, "label": self.label, "title": self.title}
        if self.non_co2_forcing is not None:
            meta["non_co2_forcing"] = self.non_co2_forcing
        return {
            "meta": meta,
            "overrides": {name: self.overrides[name] for name in sorted(self.overrides)},
            "uncertainty": [r.to_dict() for r in self.uncertainty],
        }


def read_forcing_csv(path: Union[str, Path]) -> Knots:
    """Annual non-CO2 forcing series (`year,forcing_wm2`) as table knots."""
    return read_table_csv(path, "forcing_wm2")


def _resolve_forcing(reference: str, pathway_path: Path) -> Path:
    candidate = Path(reference)
    if candidate.is_absolute():
        return candidate
    for base in (pathway_path.parent, DATA_DIR):
        if (base / candidate).is_file():
            return base / candidate
    return DATA_DIR / candidate


def _number(value: Any, what: str, path: Path) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{what} must be a number, got {value!r}.", path=path)
    return float(value)


def _check_admissible(registry: ParameterRegistry, name: str, value: float, what: str) -> None:
    entry = registry[name]
    if entry.low is None or entry.high is None:
        raise OutOfRange(f"{what} '{name}' has no admissible range in the registry and cannot vary.")
    if not entry.admits(value):
        raise OutOfRange(f"{what} '{name}' = {value:g} is outside the admissible range [{entry.low:g}, {entry.high:g}].")


def _parse_overrides(raw: Any, registry: ParameterRegistry, path: Path) -> Dict[str, float]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ParseError("'overrides' must be an object of name -> value.", path=path)
    overrides: Dict[str, float] = {}
    for name, value in raw.items():
        if name not in registry:
            raise UnknownParameter(f"Pathway {path.name} overrides unknown parameter '{name}'.")
        entry = registry[name]
        if entry.is_table:
            raise ParseError(f"'{name}' is a table; pathways override scalar parameters only.", path=path)
        if entry.group not in OVERRIDE_GROUPS:
            raise OutOfRange(f"Override '{name}' belongs to group '{entry.group}', which pathways do not vary.")
        number = _number(value, f"Override '{name}'", path)
        _check_admissible(registry, name, number, "Override")
        overrides[name] = number
    return overrides


def _parse_uncertainty(raw: Any, registry: ParameterRegistry, path: Path) -> Tuple[ParameterRange, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ParseError("'uncertainty' must be a list of ranges.", path=path)
    ranges: List[ParameterRange] = []
    seen = set()
    for item in raw:
        if not isinstance(item, dict) or "parameter" not in item:
            raise ParseError("Uncertainty entries need 'parameter', 'low' and 'high'.", path=path)
        name = str(item["parameter"])
        if name not in registry or registry[name].is_table:
            raise UnknownParameter(f"Pathway {path.name} declares a range for unknown parameter '{name}'.")
        if name in seen:
            raise DuplicateName(f"Pathway {path.name} declares two ranges for '{name}'.")
        seen.add(name)
        low = _number(item.get("low"), f"Range low of '{name}'", path)
        high = _number(item.get("high"), f"Range high of '{name}'", path)
        if low > high:
            raise OutOfRange(f"Range of '{name}' has low {low:g} > high {high:g}.")
        _check_admissible(registry, name, low, "Range low of")
        _check_admissible(registry, name, high, "Range high of")
        distribution = str(item.get("distribution", "uniform"))
        if distribution not in DISTRIBUTIONS:
            raise ParseError(f"Unsupported distribution '{distribution}' for '{name}'.", path=path)
        ranges.append(ParameterRange(name, low, high, distribution))
    return tuple(ranges)


def load_pathway(path: Union[str, Path], registry: Optional[ParameterRegistry] = None) -> PathwaySpec:
    path = Path(path)
    registry = registry if registry is not None else load_registry()
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno) from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"Cannot read pathway: {exc}", path=path) from exc
    if not isinstance(payload, dict) or not isinstance(payload.get("meta"), dict):
        raise ParseError("Pathway file needs a 'meta' object.", path=path)

    meta = payload["meta"]
    pathway_id = str(meta.get("id", ""))
    label = str(meta.get("label", ""))
    if pathway_id not in PATHWAY_LABELS:
        raise BadLabel(f"Unknown pathway id '{pathway_id}' in {path.name}; expected one of {', '.join(PATHWAY_LABELS)}.")
    if label != PATHWAY_LABELS[pathway_id]:
        raise BadLabel(f"Pathway {pathway_id} must be labelled {PATHWAY_LABELS[pathway_id]}, not '{label}'.")

    forcing_ref = meta.get("non_co2_forcing")
    forcing = None
    if forcing_ref is not None:
        forcing_ref = str(forcing_ref)
        forcing = read_forcing_csv(_resolve_forcing(forcing_ref, path))

    spec = PathwaySpec(
        id=pathway_id,
        label=label,
        title=str(meta.get("title", "")),
        overrides=_parse_overrides(payload.get("overrides"), registry, path),
        uncertainty=_parse_uncertainty(payload.get("uncertainty"), registry, path),
        non_co2_forcing=forcing_ref,
        forcing=forcing,
    )
    logger.debug("Loaded pathway %s (%d overrides, %d ranges)", spec.id, len(spec.overrides), len(spec.uncertainty))
    return spec


def dump_pathway(spec: PathwaySpec, path: Union[str, Path, None] = None) -> str:
    text = json.dumps(spec.to_dict(), ensure_ascii=False, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def apply_pathway(base: ParameterSet, spec: PathwaySpec) -> ParameterSet:
    values: Dict[str, Any] = dict(spec.overrides)
    if spec.forcing is not None:
        values[FORCING_PARAMETER] = spec.forcing
    return base.with_values(values) if values else base


def pathway_path(pathway_id: str, directory: Union[str, Path, None] = None) -> Path:
    if pathway_id not in PATHWAY_FILES:
        raise BadLabel(f"Unknown pathway id '{pathway_id}'.")
    return Path(directory or PATHWAYS_DIR) / PATHWAY_FILES[pathway_id]


def resolve_pathway(ref: Union[str, Path], registry: Optional[ParameterRegistry] = None) -> PathwaySpec:
    """Accept a pathway id (`BAU`) or a pathway file path."""
    if str(ref) in PATHWAY_FILES:
        return load_pathway(pathway_path(str(ref)), registry)
    return load_pathway(ref, registry)


def load_pathways(
    directory: Union[str, Path, None] = None,
    registry: Optional[ParameterRegistry] = None,
    ids: Optional[Sequence[str]] = None,
) -> Dict[str, PathwaySpec]:
    registry = registry if registry is not None else load_registry()
    return {pid: load_pathway(pathway_path(pid, directory), registry) for pid in (ids or PATHWAY_FILES)}


def registry_ranges(registry: ParameterRegistry, spec: Optional[PathwaySpec] = None) -> List[ParameterRange]:
    """Registry ranges of the screen-flagged scalars the pathway leaves free."""
    fixed = set(spec.overrides) if spec is not None else set()
    return [
        ParameterRange(e.name, float(e.low), float(e.high))
        for e in registry.screen_candidates()
        if e.name not in fixed and e.low is not None and e.high is not None
    ]


def candidate_ranges(registry: ParameterRegistry, spec: PathwaySpec) -> List[ParameterRange]:
    return list(spec.uncertainty) if spec.uncertainty else registry_ranges(registry, spec)


def load_ranges(path: Union[str, Path], registry: Optional[ParameterRegistry] = None) -> Tuple[ParameterRange, ...]:
    """Explicit range file: a list of ranges, or an object with an 'uncertainty' list."""
    path = Path(path)
    registry = registry if registry is not None else load_registry()
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno) from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"Cannot read range file: {exc}", path=path) from exc
    if isinstance(payload, dict):
        payload = payload.get("uncertainty")
    ranges = _parse_uncertainty(payload, registry, path)
    if not ranges:
        raise ParseError("Range file declares no ranges.", path=path)
    return ranges
