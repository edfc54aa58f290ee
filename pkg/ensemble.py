"""
ensemble.py - Morris screening, Latin hypercube sampling and the deterministic ensemble runner.

Realizations run in fixed-size chunks (WORLDPATH_CHUNK_SIZE) as numpy batches. Chunk
boundaries never depend on the worker count and chunk statistics are merged in realization
order, so any number of workers produces bit-identical envelopes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from joblib import Parallel, delayed
import numpy as np
import pandas as pd
from SALib.analyze import morris as morris_analyze
from SALib.sample import morris as morris_sample

from engine import BatchTrajectory, ExecutableModel, TimeGrid, run_batch
from errors import (
    InputError,
    NegativePopulation,
    NegativeReservoir,
    NonFiniteValue,
    ObjectiveFailure,
    OutOfRange,
    ParseError,
    RealizationFailure,
    SchemaMismatch,
    SimulationError,
)
from outputs import MANIFEST_NAME, StagedOutput, read_manifest
from scenarios import ParameterRange, PathwaySpec, apply_pathway, candidate_ranges
from sectors import COHORTS, RESERVOIRS, SEXES, ParameterRegistry, ParameterSet, compile_world
import settings


logger = logging.getLogger(__name__)

MILESTONES = (2030, 2050, 2100)
RETAIN_YEARS = (2015,) + MILESTONES
DEFAULT_TRAJECTORIES = 20
DEFAULT_LEVELS = 4
DEFAULT_KEEP = 20
DEFAULT_SCREEN_OUTPUT = "climate.temperature"

ModelFactory = Callable[[ParameterSet], ExecutableModel]

# substream tags inside one seed
_PERMUTATION_STREAM = 0
_JITTER_STREAM = 1


def substream(seed: int, stream: int, index: int) -> np.random.Generator:
    """Independent Philox generator keyed by (seed, stream, index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream), int(index)])))


# ---------- Sampling ----------
@dataclass(frozen=True)
class SampleMatrix:
    ranges: Tuple[ParameterRange, ...]
    values: np.ndarray  # (n, len(ranges))
    seed: int

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(self.ranges):
            raise ValueError(f"Sample matrix shape {values.shape} does not match {len(self.ranges)} ranges.")
        if values.shape[0] < 1:
            raise ValueError("Sample matrix needs at least one realization.")
        object.__setattr__(self, "ranges", tuple(self.ranges))
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def parameters(self) -> List[str]:
        return [r.parameter for r in self.ranges]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.parameters.index(name)]

    def row(self, index: int) -> Dict[str, float]:
        return {name: float(v) for name, v in zip(self.parameters, self.values[index])}

    def block(self, start: int, stop: int) -> Dict[str, np.ndarray]:
        return {name: self.values[start:stop, j].copy() for j, name in enumerate(self.parameters)}

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=self.parameters)
        frame.insert(0, "realization", np.arange(self.n))
        return frame


def lhs_sample(ranges: Sequence[ParameterRange], n: int, seed: int) -> SampleMatrix:
    """
    Latin hypercube: one sample per equal-probability stratum in every column.

    Stratum permutations are keyed by (seed, column) and drawn over all N strata, so a row
    depends on N; the in-stratum jitter of realization i is keyed by (seed, i) alone.
    Growing an ensemble therefore redraws its rows. Reproduce a run with the same seed and N.
    """
    if n < 1:
        raise OutOfRange(f"Ensemble size must be at least 1, got {n}.")
    ranges = tuple(ranges)
    p = len(ranges)
    strata = np.empty((n, p), dtype=float)
    for j in range(p):
        strata[:, j] = substream(seed, _PERMUTATION_STREAM, j).permutation(n)
    jitter = np.empty((n, p), dtype=float)
    for i in range(n):
        jitter[i] = substream(seed, _JITTER_STREAM, i).random(p)
    unit = (strata + jitter) / n
    values = np.empty((n, p), dtype=float)
    for j, r in enumerate(ranges):
        values[:, j] = np.clip(r.scale(unit[:, j]), r.low, r.high)
    return SampleMatrix(ranges, values, int(seed))


# ---------- Morris screening ----------
@dataclass(frozen=True)
class MorrisResult:
    names: Tuple[str, ...]
    mu_star: np.ndarray
    sigma: np.ndarray
    mu: np.ndarray
    trajectories: int
    levels: int

    def ranked(self) -> List[str]:
        order = sorted(range(len(self.names)), key=lambda i: (-float(self.mu_star[i]), self.names[i]))
        return [self.names[i] for i in order]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"parameter": list(self.names), "mu_star": self.mu_star, "sigma": self.sigma, "mu": self.mu})
        rank = {name: k + 1 for k, name in enumerate(self.ranked())}
        frame["rank"] = frame["parameter"].map(rank)
        return frame.sort_values("rank", kind="stable").reset_index(drop=True)


def _evaluate_objective(objective: Callable, X: np.ndarray, names: Sequence[str], vectorized: bool) -> np.ndarray:
    def point(row: np.ndarray) -> Dict[str, float]:
        return {name: float(v) for name, v in zip(names, row)}

    if vectorized:
        try:
            Y = np.asarray(objective(X), dtype=float).reshape(-1)
        except ObjectiveFailure:
            raise
        except NonFiniteValue as exc:
            where = point(X[exc.column]) if exc.column is not None else None
            raise ObjectiveFailure(f"Objective failed: {exc}", point=where) from exc
        except (SimulationError, ArithmeticError, ValueError) as exc:
            raise ObjectiveFailure(f"Objective failed on a batch of {len(X)} points: {exc}") from exc
        if Y.shape[0] != X.shape[0]:
            raise ObjectiveFailure(f"Vectorized objective returned {Y.shape[0]} values for {X.shape[0]} points.")
    else:
        Y = np.empty(X.shape[0], dtype=float)
        for k, row in enumerate(X):
            try:
                Y[k] = float(objective(row))
            except ObjectiveFailure:
                raise
            except (SimulationError, ArithmeticError, ValueError) as exc:
                raise ObjectiveFailure(f"Objective failed: {exc}", point=point(row)) from exc
    bad = np.flatnonzero(~np.isfinite(Y))
    if bad.size:
        raise ObjectiveFailure("Objective returned a non-finite value.", point=point(X[bad[0]]))
    return Y


def morris_screen(
    objective: Callable,
    ranges: Sequence[ParameterRange],
    r: int = DEFAULT_TRAJECTORIES,
    p: int = DEFAULT_LEVELS,
    seed: int = 0,
    *,
    vectorized: bool = False,
) -> MorrisResult:
    """Elementary-effects screening with SALib; effects are in unit-hypercube coordinates."""
    if r < 2:
        raise OutOfRange(f"Morris screening needs at least 2 trajectories, got {r}.")
    if p < 4 or p % 2:
        raise OutOfRange(f"Morris levels must be even and at least 4, got {p}.")
    ranges = tuple(ranges)
    names = tuple(rg.parameter for rg in ranges)
    mu_star = np.zeros(len(ranges))
    sigma = np.zeros(len(ranges))
    mu = np.zeros(len(ranges))

    # degenerate ranges cannot move the output
    active = [j for j, rg in enumerate(ranges) if rg.high > rg.low]
    if active:
        problem = {
            "num_vars": len(active),
            "names": [names[j] for j in active],
            "bounds": [[ranges[j].low, ranges[j].high] for j in active],
        }
        X_active = morris_sample.sample(problem, N=r, num_levels=p, seed=seed)
        X = np.empty((X_active.shape[0], len(ranges)), dtype=float)
        for j, rg in enumerate(ranges):
            X[:, j] = rg.low
        X[:, active] = X_active
        logger.info("Morris screening: %d parameters, %d trajectories, %d evaluations", len(active), r, len(X))
        Y = _evaluate_objective(objective, X, names, vectorized)
        analysis = morris_analyze.analyze(problem, X_active, Y, num_levels=p, seed=seed, print_to_console=False)
        mu_star[active] = np.nan_to_num(np.asarray(analysis["mu_star"], dtype=float))
        sigma[active] = np.nan_to_num(np.asarray(analysis["sigma"], dtype=float))
        mu[active] = np.nan_to_num(np.asarray(analysis["mu"], dtype=float))
    return MorrisResult(names, mu_star, sigma, mu, int(r), int(p))


def _output_objective(model: ExecutableModel, names: Sequence[str], output: str, year: float, grid: TimeGrid) -> Callable:
    index = grid.index_of(year)

    def objective(X: np.ndarray) -> np.ndarray:
        overrides = {name: X[:, j].copy() for j, name in enumerate(names)}
        batch = run_batch(model, grid, overrides=overrides, batch=X.shape[0], record=[output])
        return batch.values[output][index]

    return objective


def screen(
    registry: ParameterRegistry,
    spec: PathwaySpec,
    *,
    output: str = DEFAULT_SCREEN_OUTPUT,
    year: float = 2100,
    r: int = DEFAULT_TRAJECTORIES,
    p: int = DEFAULT_LEVELS,
    seed: int = 0,
    model_factory: ModelFactory = compile_world,
    grid: Optional[TimeGrid] = None,
) -> Tuple[MorrisResult, List[ParameterRange]]:
    """Morris screening of a pathway's candidate ranges against `output` at `year`."""
    grid = grid or TimeGrid()
    ranges = candidate_ranges(registry, spec)
    model = model_factory(apply_pathway(registry.nominal_set(), spec))
    names = [rg.parameter for rg in ranges]
    objective = _output_objective(model, names, output, year, grid)
    return morris_screen(objective, ranges, r, p, seed, vectorized=True), ranges


def screen_then_range(
    registry: ParameterRegistry,
    spec: PathwaySpec,
    k: int = DEFAULT_KEEP,
    **options: Any,
) -> List[ParameterRange]:
    """The k candidate ranges with the largest mu*, most influential first."""
    if k < 1:
        raise OutOfRange(f"Screening keep-count must be at least 1, got {k}.")
    result, ranges = screen(registry, spec, **options)
    by_name = {rg.parameter: rg for rg in ranges}
    kept = [by_name[name] for name in result.ranked()[:k]]
    logger.info("Screening kept %d of %d parameters: %s", len(kept), len(ranges), ", ".join(rg.parameter for rg in kept))
    return kept


# ---------- Ensemble execution ----------
@dataclass(frozen=True)
class _ChunkStats:
    start: int
    count: int
    mean: np.ndarray  # (variables, years)
    m2: np.ndarray
    retained: Dict[str, np.ndarray]  # variable -> (count, len(retain_years))


def _nonnegative_stocks() -> Dict[str, type]:
    checks: Dict[str, type] = {f"population.{s}.{c}": NegativePopulation for s in SEXES for c in COHORTS}
    checks.update({f"carbon.{r}": NegativeReservoir for r in RESERVOIRS})
    return checks


def _check_physical(batch: BatchTrajectory, start: int, block: Mapping[str, np.ndarray]) -> None:
    for name, error in _nonnegative_stocks().items():
        if name not in batch.values:
            continue
        negative = np.flatnonzero((batch.values[name] < 0).any(axis=0))
        if negative.size:
            column = int(negative[0])
            row = {p: float(v[column]) for p, v in block.items()}
            raise RealizationFailure(start + column, row, error(f"Stock '{name}' became negative."))


def _run_chunk(
    model: ExecutableModel,
    grid: TimeGrid,
    block: Mapping[str, np.ndarray],
    start: int,
    count: int,
    record: Sequence[str],
    retain: Sequence[str],
    retain_index: Sequence[int],
) -> _ChunkStats:
    try:
        batch = run_batch(model, grid, overrides=block, batch=count, record=record)
    except NonFiniteValue as exc:
        column = exc.column or 0
        row = {p: float(v[column]) for p, v in block.items()}
        raise RealizationFailure(start + column, row, exc) from exc
    _check_physical(batch, start, block)

    stacked = np.stack([batch.values[name] for name in record])  # (variables, years, count)
    mean = stacked.mean(axis=2)
    m2 = ((stacked - mean[:, :, None]) ** 2).sum(axis=2)
    retained = {name: batch.values[name][list(retain_index)].T.copy() for name in retain}
    return _ChunkStats(start, count, mean, m2, retained)


def _merge(chunks: Sequence[_ChunkStats]) -> Tuple[np.ndarray, np.ndarray, int]:
    """Pairwise combination of chunk means and squared-deviation sums, in realization order."""
    total = 0
    mean = m2 = None
    for chunk in chunks:
        if mean is None:
            total, mean, m2 = chunk.count, chunk.mean.copy(), chunk.m2.copy()
            continue
        n = total + chunk.count
        delta = chunk.mean - mean
        mean = mean + delta * (chunk.count / n)
        m2 = m2 + chunk.m2 + delta**2 * (total * chunk.count / n)
        total = n
    return mean, m2, total


@dataclass(frozen=True)
class EnsembleResult:
    pathway: str
    grid: TimeGrid
    variables: Tuple[str, ...]
    mean: np.ndarray  # (variables, years)
    std: np.ndarray
    retained: Mapping[str, np.ndarray]  # variable -> (n, len(retain_years))
    retain_years: Tuple[int, ...]
    n: int
    seed: int
    samples: Optional[SampleMatrix] = None
    chunk_size: int = settings.DEFAULT_CHUNK_SIZE
    details: Mapping[str, Any] = field(default_factory=dict)

    def _row(self, variable: str) -> int:
        try:
            return self.variables.index(variable)
        except ValueError:
            raise KeyError(f"Ensemble for {self.pathway} has no envelope for '{variable}'.") from None

    def envelope(self, variable: str) -> Tuple[np.ndarray, np.ndarray]:
        row = self._row(variable)
        return self.mean[row], self.std[row]

    def mean_at(self, variable: str, year: float) -> float:
        return float(self.mean[self._row(variable), self.grid.index_of(year)])

    def std_at(self, variable: str, year: float) -> float:
        return float(self.std[self._row(variable), self.grid.index_of(year)])

    def has_values(self, variable: str, year: int) -> bool:
        return variable in self.retained and int(year) in self.retain_years

    def values(self, variable: str, year: int) -> np.ndarray:
        """Per-realization values of a retained variable at a retained year."""
        if variable not in self.retained:
            raise KeyError(f"Ensemble for {self.pathway} retains no values for '{variable}'.")
        if int(year) not in self.retain_years:
            raise KeyError(f"Ensemble for {self.pathway} retains no values at {year}.")
        return self.retained[variable][:, self.retain_years.index(int(year))]

    def envelope_frame(self) -> pd.DataFrame:
        years = self.grid.times.astype(int)
        count = len(years)
        return pd.DataFrame(
            {
                "pathway": self.pathway,
                "variable": np.repeat(np.array(self.variables, dtype=object), count),
                "year": np.tile(years, len(self.variables)),
                "mean": self.mean.reshape(-1),
                "std": self.std.reshape(-1),
            }
        )

    def indicator_frame(self) -> pd.DataFrame:
        frames = []
        for name in sorted(self.retained):
            values = self.retained[name]
            frames.append(
                pd.DataFrame(
                    {
                        "pathway": self.pathway,
                        "realization": np.repeat(np.arange(self.n), len(self.retain_years)),
                        "variable": name,
                        "year": np.tile(np.array(self.retain_years, dtype=int), self.n),
                        "value": values.reshape(-1),
                    }
                )
            )
        if not frames:
            return pd.DataFrame(columns=["pathway", "realization", "variable", "year", "value"])
        return pd.concat(frames, ignore_index=True)

    def write(self, stage: StagedOutput) -> None:
        stage.write_csv("envelope.csv", self.envelope_frame())
        stage.write_csv("indicators.csv", self.indicator_frame())
        if self.samples is not None:
            stage.write_csv("samples.csv", self.samples.to_frame())


def run_ensemble(
    model_factory: ModelFactory,
    spec: PathwaySpec,
    n: int,
    seed: int,
    workers: int = 1,
    *,
    base: ParameterSet,
    ranges: Optional[Sequence[ParameterRange]] = None,
    grid: Optional[TimeGrid] = None,
    record: Optional[Sequence[str]] = None,
    retain: Sequence[str] = (),
    retain_years: Sequence[int] = RETAIN_YEARS,
    chunk_size: Optional[int] = None,
) -> EnsembleResult:
    """N realizations of a pathway; realization i applies LHS row i over the pathway's nominal parameters."""
    if n < 1:
        raise OutOfRange(f"Ensemble size must be at least 1, got {n}.")
    if workers < 1:
        raise OutOfRange(f"Worker count must be at least 1, got {workers}.")
    grid = grid or TimeGrid()
    chunk = int(chunk_size or settings.chunk_size())
    ranges = tuple(ranges if ranges is not None else spec.uncertainty)
    samples = lhs_sample(ranges, n, seed)
    model = model_factory(apply_pathway(base, spec))

    names = list(record) if record is not None else list(model.variables)
    retain = [name for name in retain]
    missing = sorted(set(retain) - set(model.variables))
    if missing:
        raise InputError(f"Cannot retain undeclared variable(s): {', '.join(missing)}")
    record_all = names + [name for name in retain if name not in names]
    retain_index = [grid.index_of(year) for year in retain_years]

    starts = list(range(0, n, chunk))
    logger.info("Ensemble %s: %d realizations in %d chunk(s) of %d, %d worker(s)", spec.id, n, len(starts), chunk, workers)
    tasks = (
        delayed(_run_chunk)(
            model, grid, samples.block(s, min(s + chunk, n)), s, min(s + chunk, n) - s, record_all, retain, retain_index
        )
        for s in starts
    )
    chunks: List[_ChunkStats] = Parallel(n_jobs=workers)(tasks)

    mean, m2, total = _merge(chunks)
    std = np.sqrt(m2 / (total - 1)) if total > 1 else np.zeros_like(m2)
    keep = [record_all.index(name) for name in names]
    retained = {name: np.concatenate([c.retained[name] for c in chunks], axis=0) for name in retain}
    return EnsembleResult(
        pathway=spec.id,
        grid=grid,
        variables=tuple(names),
        mean=mean[keep],
        std=std[keep],
        retained=retained,
        retain_years=tuple(int(y) for y in retain_years),
        n=total,
        seed=int(seed),
        samples=samples,
        chunk_size=chunk,
    )


# ---------- Reload ----------
def _require_columns(frame: pd.DataFrame, columns: Sequence[str], path: Path) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise SchemaMismatch(f"{path} lacks column(s): {', '.join(missing)}")


def _grid_from_years(years: np.ndarray, path: Path) -> TimeGrid:
    if len(years) < 2:
        raise SchemaMismatch(f"{path} needs at least two years.")
    step = float(years[1] - years[0])
    if not np.allclose(np.diff(years), step):
        raise SchemaMismatch(f"{path} years are not evenly spaced.")
    return TimeGrid(float(years[0]), float(years[-1]), step)


def load_ensemble(directory: Union[str, Path]) -> EnsembleResult:
    """Reload an ensemble directory written by `run_ensemble` through the CLI."""
    directory = Path(directory)
    envelope_path = directory / "envelope.csv"
    indicators_path = directory / "indicators.csv"
    try:
        envelope = pd.read_csv(envelope_path, encoding="utf-8", float_precision="round_trip")
        indicators = pd.read_csv(indicators_path, encoding="utf-8", float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise ParseError(f"Cannot read ensemble output: {exc}", path=directory) from exc
    _require_columns(envelope, ("pathway", "variable", "year", "mean", "std"), envelope_path)
    _require_columns(indicators, ("pathway", "realization", "variable", "year", "value"), indicators_path)
    pathways = set(envelope["pathway"].astype(str))
    if len(pathways) != 1:
        raise SchemaMismatch(f"{envelope_path} mixes pathways: {sorted(pathways)}")
    pathway = pathways.pop()

    variables = tuple(dict.fromkeys(envelope["variable"].astype(str)))
    years = np.array(sorted(envelope["year"].unique()), dtype=float)
    grid = _grid_from_years(years, envelope_path)
    mean = envelope.pivot(index="variable", columns="year", values="mean").loc[list(variables)].to_numpy(dtype=float)
    std = envelope.pivot(index="variable", columns="year", values="std").loc[list(variables)].to_numpy(dtype=float)

    manifest = read_manifest(directory) if (directory / MANIFEST_NAME).is_file() else None
    retain_years = tuple(sorted(int(y) for y in indicators["year"].unique()))
    n = int(indicators["realization"].max()) + 1 if len(indicators) else int(manifest.n if manifest and manifest.n else 0)
    retained: Dict[str, np.ndarray] = {}
    for name, group in indicators.groupby("variable", sort=True):
        table = group.pivot(index="realization", columns="year", values="value")
        table = table.reindex(index=range(n), columns=list(retain_years))
        if table.isna().any().any():
            raise SchemaMismatch(f"{indicators_path} has gaps for '{name}'.")
        retained[str(name)] = table.to_numpy(dtype=float)

    samples = None
    samples_path = directory / "samples.csv"
    if samples_path.is_file():
        frame = pd.read_csv(samples_path, encoding="utf-8", float_precision="round_trip")
        params = [c for c in frame.columns if c != "realization"]
        if params:
            ranges = tuple(ParameterRange(p, float(frame[p].min()), float(frame[p].max())) for p in params)
            samples = SampleMatrix(ranges, frame[params].to_numpy(dtype=float), int(manifest.seed or 0) if manifest else 0)

    details = dict(manifest.details) if manifest else {}
    return EnsembleResult(
        pathway=pathway,
        grid=grid,
        variables=variables,
        mean=mean,
        std=std,
        retained=retained,
        retain_years=retain_years,
        n=n,
        seed=int(manifest.seed) if manifest and manifest.seed is not None else 0,
        samples=samples,
        chunk_size=int(details.get("chunk_size", settings.DEFAULT_CHUNK_SIZE)),
        details=details,
    )
