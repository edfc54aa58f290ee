"""
sdg.py - SDG progress scoring of ensemble results.

Each indicator is normalized against its target as (x - w) / (t - w) * 100, where w is the
same realization's simulated 2015 value. Goal indices are the unweighted mean of member
scores, and both are classified into four progress levels.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import IntEnum
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ensemble import MILESTONES, EnsembleResult
from errors import (
    BadLabel,
    DegenerateTarget,
    DuplicateName,
    EmptyGoal,
    MissingMilestone,
    MissingVariable,
    NonMonotoneAmbition,
    ParseError,
    SchemaMismatch,
    ZeroReference,
)
from settings import INDICATORS_JSON, TARGETS_JSON


logger = logging.getLogger(__name__)

GOALS = ("SDG2", "SDG3", "SDG4", "SDG7", "SDG8", "SDG12", "SDG13", "SDG15")
AMBITIONS = ("weak", "moderate", "ambitious")
BASES = ("sdg-absolute", "technical-optimum", "leave-no-one-behind", "sensible-improvement")
DIRECTIONS = ("increase", "decrease")
BASE_YEAR = 2015

ENTRY_POINTS: Dict[str, str] = {
    "population.total": "well-being",
    "education.no_education_share": "well-being",
    "land.cropland_pasture": "food",
    "food.animal_intake": "food",
    "energy.demand": "energy",
    "energy.fossil_production": "energy",
    "economy.gwp_per_capita": "economy",
    "carbon.atmospheric_ppm": "economy",
}


class ProgressLevel(IntEnum):
    DETERIORATING = 0
    STAGNATING = 1
    IMPROVING = 2
    ON_TRACK = 3

    @property
    def label(self) -> str:
        return {0: "Deteriorating", 1: "Stagnating", 2: "Improving", 3: "OnTrack"}[int(self)]

    @property
    def key(self) -> str:
        return self.name.lower()


# ---------- Catalog ----------
@dataclass(frozen=True)
class IndicatorDef:
    id: str
    goal: str
    variable: str
    units: str = ""
    direction: str = "increase"
    name: str = ""


def _read_json(path: Path, what: str) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno) from exc
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"Cannot read {what}: {exc}", path=path) from exc


def load_catalog(path: Union[str, Path, None] = None, variables: Optional[Iterable[str]] = None) -> Tuple[IndicatorDef, ...]:
    """Indicator catalog; with `variables`, every indicator must name one of them."""
    path = Path(path) if path is not None else INDICATORS_JSON
    payload = _read_json(path, "indicator catalog")
    items = payload.get("indicators") if isinstance(payload, dict) else payload
    if not isinstance(items, list):
        raise ParseError("Indicator catalog must be a list of indicators.", path=path)

    known = set(variables) if variables is not None else None
    catalog: List[IndicatorDef] = []
    seen = set()
    for raw in items:
        if not isinstance(raw, dict) or not raw.get("id") or not raw.get("variable"):
            raise ParseError("Catalog entries need 'id', 'goal' and 'variable'.", path=path)
        ind = IndicatorDef(
            id=str(raw["id"]),
            goal=str(raw.get("goal", "")),
            variable=str(raw["variable"]),
            units=str(raw.get("units", "")),
            direction=str(raw.get("direction", "increase")),
            name=str(raw.get("name", "")),
        )
        if ind.goal not in GOALS:
            raise ParseError(f"Indicator '{ind.id}' has unknown goal '{ind.goal}'.", path=path)
        if ind.direction not in DIRECTIONS:
            raise ParseError(f"Indicator '{ind.id}' has unknown direction '{ind.direction}'.", path=path)
        if ind.id in seen:
            raise DuplicateName(f"Indicator '{ind.id}' appears twice in {path}.")
        if known is not None and ind.variable not in known:
            raise MissingVariable(f"Indicator '{ind.id}' reads '{ind.variable}', which the model does not define.")
        seen.add(ind.id)
        catalog.append(ind)
    return tuple(catalog)


def catalog_variables(catalog: Sequence[IndicatorDef]) -> List[str]:
    return sorted({ind.variable for ind in catalog})


# ---------- Targets ----------
@dataclass(frozen=True)
class IndicatorTargets:
    indicator: str
    basis: str
    base_2015: float
    targets: Mapping[str, Mapping[int, float]]  # ambition -> milestone -> value

    @property
    def direction(self) -> str:
        return "increase" if self.targets[AMBITIONS[0]][MILESTONES[0]] > self.base_2015 else "decrease"

    def target(self, ambition: str, milestone: int) -> float:
        if ambition not in self.targets:
            raise BadLabel(f"Unknown ambition '{ambition}'; expected one of {', '.join(AMBITIONS)}.")
        by_year = self.targets[ambition]
        if int(milestone) not in by_year:
            raise MissingMilestone(f"No {ambition} target for '{self.indicator}' at {milestone}.")
        return by_year[int(milestone)]


@dataclass(frozen=True)
class TargetSet:
    indicators: Mapping[str, IndicatorTargets]
    source: Optional[Path] = None

    def __contains__(self, indicator: object) -> bool:
        return indicator in self.indicators

    def __getitem__(self, indicator: str) -> IndicatorTargets:
        return self.indicators[indicator]

    def target(self, indicator: str, ambition: str, milestone: int) -> float:
        return self.indicators[indicator].target(ambition, milestone)

    def basis_counts(self) -> Dict[str, int]:
        counts = Counter(t.basis for t in self.indicators.values())
        return {basis: counts.get(basis, 0) for basis in BASES}


def _check_monotone(entry: IndicatorTargets) -> None:
    sign = 1.0 if entry.direction == "increase" else -1.0
    for ambition in AMBITIONS:
        values = [entry.targets[ambition][m] for m in MILESTONES]
        steps = [sign * (b - a) for a, b in zip([entry.base_2015] + values[:-1], values)]
        if any(step < 0 for step in steps):
            raise NonMonotoneAmbition(
                f"{ambition} targets of '{entry.indicator}' are not monotone toward improvement: "
                + ", ".join(f"{m}={v:g}" for m, v in zip(MILESTONES, values))
            )
    for milestone in MILESTONES:
        values = [entry.targets[a][milestone] for a in AMBITIONS]
        if any(sign * (b - a) < 0 for a, b in zip(values, values[1:])):
            raise NonMonotoneAmbition(
                f"{milestone} targets of '{entry.indicator}' get less ambitious from weak to ambitious."
            )


def load_targets(path: Union[str, Path, None] = None) -> TargetSet:
    path = Path(path) if path is not None else TARGETS_JSON
    payload = _read_json(path, "target set")
    items = payload.get("indicators") if isinstance(payload, dict) else None
    if not isinstance(items, dict):
        raise ParseError("Target set needs an 'indicators' object.", path=path)

    out: Dict[str, IndicatorTargets] = {}
    for indicator, raw in items.items():
        if not isinstance(raw, dict) or not isinstance(raw.get("targets"), dict):
            raise ParseError(f"Targets of '{indicator}' need 'basis', 'base_2015' and 'targets'.", path=path)
        basis = str(raw.get("basis", ""))
        if basis not in BASES:
            raise ParseError(f"Targets of '{indicator}' have unknown basis '{basis}'.", path=path)
        try:
            base = float(raw["base_2015"])
            table: Dict[str, Dict[int, float]] = {}
            for ambition in AMBITIONS:
                by_year = raw["targets"][ambition]
                table[ambition] = {int(m): float(by_year[str(m)]) for m in MILESTONES}
        except KeyError as exc:
            raise ParseError(f"Targets of '{indicator}' lack {exc}.", path=path) from exc
        except (TypeError, ValueError) as exc:
            raise ParseError(f"Targets of '{indicator}' are malformed: {exc}", path=path) from exc
        for ambition, by_year in table.items():
            for milestone, value in by_year.items():
                if value == base:
                    raise DegenerateTarget(
                        f"{ambition} {milestone} target of '{indicator}' equals its 2015 base value ({base:g})."
                    )
        entry = IndicatorTargets(str(indicator), basis, base, table)
        _check_monotone(entry)
        out[entry.indicator] = entry

    targets = TargetSet(out, source=path)
    counts = targets.basis_counts()
    logger.info("Loaded targets for %d indicators (%s)", len(out), ", ".join(f"{k}: {v}" for k, v in counts.items()))
    return targets


def check_catalog_targets(catalog: Sequence[IndicatorDef], targets: TargetSet) -> None:
    for ind in catalog:
        if ind.id not in targets:
            raise SchemaMismatch(f"Indicator '{ind.id}' has no targets.")
        if targets[ind.id].direction != ind.direction:
            raise SchemaMismatch(
                f"Indicator '{ind.id}' is marked '{ind.direction}' but its targets point '{targets[ind.id].direction}'."
            )


# ---------- Scoring primitives ----------
def normalize(x: Any, w: Any, t: Any) -> Any:
    """Target achievement in percent: 0 at the base value, 100 at the target. Not clamped."""
    x_arr, w_arr, t_arr = (np.asarray(v, dtype=float) for v in (x, w, t))
    if np.any(t_arr == w_arr):
        raise DegenerateTarget(f"Target equals base value ({float(np.ravel(t_arr)[0]):g}); the score is undefined.")
    score = (x_arr - w_arr) / (t_arr - w_arr) * 100.0
    return float(score) if score.ndim == 0 else score


def goal_index(scores: Any) -> Any:
    """Equal-weight mean over the indicator axis; rows are indicators, columns realizations."""
    arr = np.asarray(scores, dtype=float)
    if arr.size == 0 or arr.shape[0] == 0:
        raise EmptyGoal("A goal needs at least one indicator score.")
    mean = arr.mean(axis=0)
    return float(mean) if np.ndim(mean) == 0 else mean


def classify_array(scores: Any) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    return np.where(s <= 0, 0, np.where(s < 50, 1, np.where(s < 100, 2, 3))).astype(int)


def classify(score: float) -> ProgressLevel:
    return ProgressLevel(int(classify_array(score)))


def modal_progress(levels: Iterable[Union[ProgressLevel, int]]) -> Tuple[ProgressLevel, Dict[ProgressLevel, float]]:
    """Most frequent level and the share of each level; ties go to the more pessimistic level."""
    arr = np.fromiter((int(level) for level in levels), dtype=int)
    if arr.size == 0:
        raise EmptyGoal("No realizations to summarize.")
    counts = np.bincount(arr, minlength=len(ProgressLevel))
    shares = {level: counts[level] / arr.size for level in ProgressLevel}
    # argmax returns the first, i.e. lowest, of tied levels
    return ProgressLevel(int(np.argmax(counts))), shares


# ---------- Ensemble reports ----------
def _std(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.0


@dataclass(frozen=True)
class IndicatorProgress:
    indicator: str
    goal: str
    variable: str
    target: float
    scores: np.ndarray  # one per realization
    level: ProgressLevel
    shares: Mapping[ProgressLevel, float]

    @property
    def mean(self) -> float:
        return float(self.scores.mean())

    @property
    def std(self) -> float:
        return _std(self.scores)


@dataclass(frozen=True)
class GoalProgress:
    goal: str
    indicators: Tuple[str, ...]
    index: np.ndarray  # one per realization
    level: ProgressLevel
    shares: Mapping[ProgressLevel, float]

    @property
    def mean(self) -> float:
        return float(self.index.mean())

    @property
    def std(self) -> float:
        return _std(self.index)


@dataclass(frozen=True)
class ProgressReport:
    pathway: str
    milestone: int
    ambition: str
    indicators: Tuple[IndicatorProgress, ...]
    goals: Tuple[GoalProgress, ...]

    def goal(self, goal: str) -> GoalProgress:
        for g in self.goals:
            if g.goal == goal:
                return g
        raise KeyError(goal)

    def indicator(self, indicator: str) -> IndicatorProgress:
        for ind in self.indicators:
            if ind.indicator == indicator:
                return ind
        raise KeyError(indicator)

    def to_dict(self) -> Dict[str, Any]:
        def shares(s: Mapping[ProgressLevel, float]) -> Dict[str, float]:
            return {level.label: float(s[level]) for level in ProgressLevel}

        return {
            "pathway": self.pathway,
            "milestone": self.milestone,
            "ambition": self.ambition,
            "indicators": [
                {
                    "indicator": ind.indicator,
                    "goal": ind.goal,
                    "variable": ind.variable,
                    "target": ind.target,
                    "score_mean": ind.mean,
                    "score_std": ind.std,
                    "modal_level": ind.level.label,
                    "shares": shares(ind.shares),
                    "scores": [float(v) for v in ind.scores],
                }
                for ind in self.indicators
            ],
            "goals": [
                {
                    "goal": g.goal,
                    "indicators": list(g.indicators),
                    "index_mean": g.mean,
                    "index_std": g.std,
                    "modal_level": g.level.label,
                    "shares": shares(g.shares),
                    "index": [float(v) for v in g.index],
                }
                for g in self.goals
            ],
        }


def score_ensemble(
    ens: EnsembleResult,
    catalog: Sequence[IndicatorDef],
    targets: TargetSet,
    ambition: str,
    milestone: int,
) -> ProgressReport:
    """Score every realization at `milestone` against the matching target, then summarize."""
    if ambition not in AMBITIONS:
        raise BadLabel(f"Unknown ambition '{ambition}'; expected one of {', '.join(AMBITIONS)}.")
    if int(milestone) not in MILESTONES:
        raise MissingMilestone(f"{milestone} is not a milestone year ({', '.join(map(str, MILESTONES))}).")
    milestone = int(milestone)
    for year in (BASE_YEAR, milestone):
        if year not in ens.retain_years:
            raise MissingMilestone(f"Ensemble for {ens.pathway} retains no values at {year}.")

    indicators: List[IndicatorProgress] = []
    for ind in catalog:
        if ind.variable not in ens.retained:
            raise MissingVariable(f"Ensemble for {ens.pathway} lacks '{ind.variable}' (indicator '{ind.id}').")
        if ind.id not in targets:
            raise SchemaMismatch(f"Indicator '{ind.id}' has no targets.")
        t = targets.target(ind.id, ambition, milestone)
        scores = normalize(ens.values(ind.variable, milestone), ens.values(ind.variable, BASE_YEAR), t)
        level, shares = modal_progress(classify_array(scores))
        indicators.append(IndicatorProgress(ind.id, ind.goal, ind.variable, t, scores, level, shares))

    goals: List[GoalProgress] = []
    for goal in GOALS:
        members = [p for p in indicators if p.goal == goal]
        if not members:
            continue
        index = goal_index(np.stack([p.scores for p in members]))
        level, shares = modal_progress(classify_array(index))
        goals.append(GoalProgress(goal, tuple(p.indicator for p in members), index, level, shares))
    return ProgressReport(ens.pathway, milestone, ambition, tuple(indicators), tuple(goals))


PROGRESS_COLUMNS = (
    "pathway", "goal", "indicator", "milestone", "ambition", "score_mean", "score_std", "modal_level",
    "share_deteriorating", "share_stagnating", "share_improving", "share_on_track",
)


def _progress_row(report: ProgressReport, goal: str, indicator: str, item: Any) -> Dict[str, Any]:
    row = {
        "pathway": report.pathway,
        "goal": goal,
        "indicator": indicator,
        "milestone": report.milestone,
        "ambition": report.ambition,
        "score_mean": item.mean,
        "score_std": item.std,
        "modal_level": item.level.label,
    }
    for level in ProgressLevel:
        row[f"share_{level.key}"] = float(item.shares[level])
    return row


def report_frames(reports: Sequence[ProgressReport]) -> Tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    """Indicator rows, goal-index rows and long-form level shares for CSV export."""
    progress, goals, shares = [], [], []
    for report in reports:
        for ind in report.indicators:
            progress.append(_progress_row(report, ind.goal, ind.indicator, ind))
        for g in report.goals:
            goals.append(_progress_row(report, g.goal, "index", g))
        for goal, indicator, item in [(i.goal, i.indicator, i) for i in report.indicators] + [
            (g.goal, "index", g) for g in report.goals
        ]:
            for level in ProgressLevel:
                shares.append(
                    {
                        "pathway": report.pathway,
                        "goal": goal,
                        "indicator": indicator,
                        "milestone": report.milestone,
                        "ambition": report.ambition,
                        "level": level.label,
                        "share": float(item.shares[level]),
                    }
                )
    share_columns = ["pathway", "goal", "indicator", "milestone", "ambition", "level", "share"]
    return (
        pd.DataFrame(progress, columns=list(PROGRESS_COLUMNS)),
        pd.DataFrame(goals, columns=list(PROGRESS_COLUMNS)),
        pd.DataFrame(shares, columns=share_columns),
    )


# ---------- Systems change ----------
@dataclass(frozen=True)
class SystemsChangeDelta:
    entry_point: str
    variable: str
    year: int
    mean_pct: float
    lo_pct: float
    hi_pct: float

    def format(self) -> str:
        # rounding to an int drops the sign of -0
        mean, lo, hi = (int(round(float(v))) for v in (self.mean_pct, self.lo_pct, self.hi_pct))
        return f"{mean}% ({lo}%–{hi}%)"


def entry_point_for(variable: str) -> str:
    return ENTRY_POINTS.get(variable, "unassigned")


def systems_change(
    ref: EnsembleResult,
    alt: EnsembleResult,
    variable: str,
    year: int,
    *,
    sigma: str = "alt",
    entry_point: Optional[str] = None,
) -> SystemsChangeDelta:
    """Percent change of the alternative mean relative to the reference mean, with a one-sigma band."""
    for ens in (ref, alt):
        if variable not in ens.variables:
            raise MissingVariable(f"Ensemble for {ens.pathway} has no envelope for '{variable}'.")
        try:
            ens.grid.index_of(year)
        except KeyError as exc:
            raise MissingMilestone(f"Ensemble for {ens.pathway} does not cover {year}.") from exc
    mean_ref, std_ref = ref.mean_at(variable, year), ref.std_at(variable, year)
    mean_alt, std_alt = alt.mean_at(variable, year), alt.std_at(variable, year)
    if mean_ref == 0:
        raise ZeroReference(f"Reference mean of '{variable}' is zero at {year}.")
    if sigma == "alt":
        spread = std_alt
    elif sigma == "pooled":
        spread = float(np.sqrt((std_ref**2 + std_alt**2) / 2.0))
    else:
        raise BadLabel(f"Unknown sigma mode '{sigma}'; use 'alt' or 'pooled'.")
    scale = 100.0 / abs(mean_ref)
    mean_pct = (mean_alt - mean_ref) * scale
    band = spread * scale
    return SystemsChangeDelta(
        entry_point or entry_point_for(variable), variable, int(year), mean_pct, mean_pct - band, mean_pct + band
    )


def systems_change_table(
    ref: EnsembleResult,
    alt: EnsembleResult,
    variables: Optional[Sequence[str]] = None,
    years: Sequence[int] = MILESTONES,
    *,
    sigma: str = "alt",
) -> List[SystemsChangeDelta]:
    names = list(variables) if variables is not None else list(ENTRY_POINTS)
    return [systems_change(ref, alt, name, year, sigma=sigma) for name in names for year in years]


def deltas_frame(deltas: Sequence[SystemsChangeDelta]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "entry_point": d.entry_point,
                "variable": d.variable,
                "year": d.year,
                "mean_pct": d.mean_pct,
                "lo_pct": d.lo_pct,
                "hi_pct": d.hi_pct,
            }
            for d in deltas
        ],
        columns=["entry_point", "variable", "year", "mean_pct", "lo_pct", "hi_pct"],
    )
