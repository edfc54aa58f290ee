"""
sectors.py - the ten-sector global world model built on the stock-flow engine.

Two layers live here:
- small pure state types and step functions for the individual sector formulations
  (aging chain, Cobb-Douglas output, logit energy competition, carbon exchange, ocean heat
  boxes, diet adoption, species abundance) used for checks and snapshots;
- the parameter registry and `assemble_world_model`, which writes the same formulations as a
  ModelDefinition so whole realizations can be integrated (and batched) by the engine.

Units: population in persons, money in trillion USD (T$), GWP per capita in thousand USD,
energy in EJ, land in billion ha (Gha), carbon in GtC, water in km3, food in kcal/person/day.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import softmax

from engine import (
    Auxiliary,
    ExecutableModel,
    Flow,
    Knots,
    ModelDefinition,
    Parameter,
    Stock,
    Table,
    Trajectory,
    compile_model,
    expression_symbols,
    validate_knots,
)
from errors import (
    DomainError,
    DuplicateName,
    InvalidTable,
    MissingOutput,
    MissingParameter,
    NegativePopulation,
    NegativeReservoir,
    ParseError,
)
from settings import REGISTRY_JSON


logger = logging.getLogger(__name__)


# ---------- Static demography / land / carbon profiles ----------
COHORTS = tuple(f"c{i:02d}" for i in range(21))
COHORT_LABELS = tuple(f"{5 * i}-{5 * i + 4}" for i in range(20)) + ("100+",)
SEXES = ("m", "f")
REPRODUCTIVE = COHORTS[3:10]  # ages 15-49
WORKING_AGE = COHORTS[3:13]  # ages 15-64
ADULT = COHORTS[3:]

# 2015 age profile (share of total population per cohort) and male fraction per cohort
AGE_SHARES = (
    0.08844, 0.0862, 0.0818, 0.0815, 0.0818, 0.0818, 0.0770, 0.0680, 0.0640, 0.0610, 0.0550,
    0.0470, 0.0400, 0.0310, 0.0210, 0.0160, 0.0104, 0.0055, 0.0020, 0.0005, 0.00006,
)
MALE_FRACTION = (0.52,) * 10 + (0.50, 0.49, 0.48, 0.47, 0.45, 0.43, 0.40, 0.36, 0.30, 0.25, 0.20)
# annual death rate per cohort at 2015 income and food levels
BASE_MORTALITY = (
    0.0085, 0.0008, 0.0006, 0.0010, 0.0013, 0.0015, 0.0018, 0.0024, 0.0033, 0.0050, 0.0074,
    0.0110, 0.0165, 0.0250, 0.0390, 0.0620, 0.1000, 0.1600, 0.2500, 0.3700, 0.5500,
)
MATURATION_RATE = 1.0 / 5.0
MORTALITY_CAP = 0.8

EDUCATION_LEVELS = ("none", "primary", "secondary", "tertiary")
SCHOOLING_YEARS = {"none": 0.0, "primary": 6.0, "secondary": 12.0, "tertiary": 16.0}
LEVEL_SHARES_2015 = {
    "m": {"none": 0.10, "primary": 0.30, "secondary": 0.43, "tertiary": 0.17},
    "f": {"none": 0.14, "primary": 0.30, "secondary": 0.41, "tertiary": 0.15},
}

ENERGY_SOURCES = ("coal", "oil", "gas", "biomass", "wind", "solar")
FOSSIL_SOURCES = ENERGY_SOURCES[:3]
RENEWABLE_SOURCES = ENERGY_SOURCES[3:]
ENERGY_SHARES_2015 = {"coal": 0.300, "oil": 0.343, "gas": 0.235, "biomass": 0.107, "wind": 0.0097, "solar": 0.0053}

LAND_CLASSES = ("arable", "permanent_crops", "pasture", "forest", "urban", "other")
LAND_2015 = {"arable": 1.40, "permanent_crops": 0.17, "pasture": 3.25, "forest": 4.0, "urban": 0.07, "other": 4.11}

FOOD_CATEGORIES = ("plant", "crop_meat", "pasture_meat", "dairy_eggs")

RESERVOIRS = ("atmosphere", "biosphere", "ocean_1", "ocean_2", "ocean_3", "ocean_4", "ocean_5")
RESERVOIRS_2015 = (851.0, 2350.0, 940.0, 2730.0, 2705.0, 11702.0, 7200.0)
PREINDUSTRIAL_CARBON = (590.0, 2300.0, 900.0, 2700.0, 2700.0, 11700.0, 7200.0)

DEEP_LAYERS = 4
TEMPERATURE_2015 = (1.05, 0.45, 0.25, 0.10, 0.03)


def _normalized_age_shares() -> Tuple[float, ...]:
    total = sum(AGE_SHARES)
    return tuple(s / total for s in AGE_SHARES)


def _sex_fraction(sex: str, index: int) -> float:
    return MALE_FRACTION[index] if sex == "m" else 1.0 - MALE_FRACTION[index]


def initial_cohort_shares() -> Dict[str, Tuple[float, ...]]:
    shares = _normalized_age_shares()
    return {sex: tuple(shares[i] * _sex_fraction(sex, i) for i in range(len(COHORTS))) for sex in SEXES}


def _adult_fraction(sex: str) -> float:
    return sum(initial_cohort_shares()[sex][3:])


WORKING_AGE_SHARE_2015 = sum(_normalized_age_shares()[3:13])


def _mean_schooling_2015() -> float:
    num = sum(_adult_fraction(s) * sum(LEVEL_SHARES_2015[s][l] * SCHOOLING_YEARS[l] for l in EDUCATION_LEVELS) for s in SEXES)
    return num / sum(_adult_fraction(s) for s in SEXES)


def _tertiary_share_2015() -> float:
    num = sum(_adult_fraction(s) * LEVEL_SHARES_2015[s]["tertiary"] for s in SEXES)
    return num / sum(_adult_fraction(s) for s in SEXES)


SCHOOLING_2015 = _mean_schooling_2015()
TERTIARY_2015 = _tertiary_share_2015()


# ---------- Sector state types ----------
@dataclass(frozen=True, eq=False)
class CohortGrid:
    male: np.ndarray
    female: np.ndarray

    def __post_init__(self) -> None:
        for attr in ("male", "female"):
            arr = np.array(getattr(self, attr), dtype=float)
            if arr.shape != (len(COHORTS),):
                raise ValueError(f"CohortGrid.{attr} needs {len(COHORTS)} cohorts, got {arr.shape}.")
            if np.any(arr < 0):
                bad = int(np.flatnonzero(arr < 0)[0])
                raise NegativePopulation(f"Cohort {attr} {COHORT_LABELS[bad]} is negative ({arr[bad]:.6g}).")
            object.__setattr__(self, attr, arr)

    @classmethod
    def zeros(cls) -> "CohortGrid":
        return cls(np.zeros(len(COHORTS)), np.zeros(len(COHORTS)))

    @property
    def total(self) -> float:
        return float(self.male.sum() + self.female.sum())

    def by_cohort(self) -> np.ndarray:
        return self.male + self.female


@dataclass(frozen=True)
class EducationState:
    graduates: Mapping[str, Tuple[float, float]]  # level -> (male, female)
    enrollment_rate: float
    graduation_rate: float

    def __post_init__(self) -> None:
        for level, pair in self.graduates.items():
            if min(pair) < 0:
                raise ValueError(f"Negative graduate stock for level '{level}'.")
        for name in ("enrollment_rate", "graduation_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"EducationState.{name} must lie in [0, 1], got {value}.")


@dataclass(frozen=True)
class EconomyState:
    capital_energy: float
    capital_other: float
    productivity: float
    labor: float
    gwp: float
    gwp_per_capita: float

    def __post_init__(self) -> None:
        for name in ("capital_energy", "capital_other", "productivity", "labor", "gwp"):
            if not getattr(self, name) > 0:
                raise DomainError(f"EconomyState.{name} must be positive, got {getattr(self, name)}.")


@dataclass(frozen=True)
class EnergySourceState:
    source: str
    cost: float
    resource: float  # remaining resource for fossils, cumulative production for renewables
    share: float
    production: float

    def __post_init__(self) -> None:
        if self.resource < 0 or self.production < 0:
            raise ValueError(f"Energy source '{self.source}' has negative resource or production.")
        if not -1e-12 <= self.share <= 1 + 1e-12:
            raise ValueError(f"Energy source '{self.source}' share {self.share} outside [0, 1].")


@dataclass(frozen=True)
class EnergyState:
    sources: Mapping[str, EnergySourceState]
    demand: float

    def __post_init__(self) -> None:
        total = sum(s.share for s in self.sources.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"Energy market shares sum to {total}, expected 1.")


@dataclass(frozen=True)
class WaterState:
    agriculture: float
    industry: float
    domestic: float
    supply: float

    def __post_init__(self) -> None:
        if min(self.agriculture, self.industry, self.domestic, self.supply) < 0:
            raise ValueError("Water withdrawals and supply must be non-negative.")

    @property
    def withdrawal(self) -> float:
        return self.agriculture + self.industry + self.domestic

    @property
    def scarcity(self) -> float:
        return self.withdrawal / self.supply if self.supply > 0 else math.inf


@dataclass(frozen=True)
class LandAccount:
    areas: Mapping[str, float]
    crop_yield: float
    n_fertilizer: float
    p_fertilizer: float

    def __post_init__(self) -> None:
        missing = [c for c in LAND_CLASSES if c not in self.areas]
        if missing:
            raise ValueError(f"LandAccount is missing class(es): {', '.join(missing)}")
        if any(v < 0 for v in self.areas.values()):
            raise ValueError("Land areas must be non-negative.")

    @property
    def total(self) -> float:
        return float(sum(self.areas[c] for c in LAND_CLASSES))

    @property
    def agricultural(self) -> float:
        return self.areas["arable"] + self.areas["permanent_crops"] + self.areas["pasture"]


@dataclass(frozen=True)
class FoodDietState:
    supply: Mapping[str, float]
    demand: Mapping[str, float]
    waste_fraction: float
    adopters: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.adopters <= 1.0:
            raise ValueError(f"Sustainable-diet adopter share {self.adopters} outside [0, 1].")
        if not 0.0 <= self.waste_fraction < 1.0:
            raise ValueError(f"Waste fraction {self.waste_fraction} outside [0, 1).")
        if any(v < 0 for v in list(self.supply.values()) + list(self.demand.values())):
            raise ValueError("Food supply and demand must be non-negative.")


@dataclass(frozen=True)
class CarbonReservoirs:
    atmosphere: float
    biosphere: float
    ocean: Tuple[float, ...]
    energy_emissions: float = 0.0
    land_emissions: float = 0.0
    ccs: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "ocean", tuple(float(v) for v in self.ocean))
        if len(self.ocean) != len(RESERVOIRS) - 2:
            raise ValueError(f"CarbonReservoirs needs {len(RESERVOIRS) - 2} ocean layers.")
        values = self.vector()
        if np.any(values < 0):
            bad = RESERVOIRS[int(np.flatnonzero(values < 0)[0])]
            raise NegativeReservoir(f"Carbon reservoir '{bad}' is negative.")

    def vector(self) -> np.ndarray:
        return np.array((self.atmosphere, self.biosphere) + self.ocean, dtype=float)

    @property
    def total(self) -> float:
        return float(self.vector().sum())

    @classmethod
    def from_vector(cls, values: Sequence[float], **fluxes: float) -> "CarbonReservoirs":
        values = [float(v) for v in values]
        return cls(values[0], values[1], tuple(values[2:]), **fluxes)

    @classmethod
    def preindustrial(cls) -> "CarbonReservoirs":
        return cls.from_vector(PREINDUSTRIAL_CARBON)


@dataclass(frozen=True)
class CarbonExchange:
    """First-order exchange coefficients (1/yr) along atmosphere-biosphere and the ocean chain."""

    k_atm_ocean: float = 0.011
    k_atm_bio: float = 0.012
    k_ocean: Tuple[float, ...] = (0.05, 0.02, 0.01, 0.002)
    equilibrium: Tuple[float, ...] = PREINDUSTRIAL_CARBON

    def pairs(self) -> List[Tuple[int, int, float]]:
        """(donor, receiver, forward coefficient) for every exchange; reverse coefficients keep `equilibrium` fixed."""
        out = [(0, 2, self.k_atm_ocean), (0, 1, self.k_atm_bio)]
        out.extend((2 + i, 3 + i, k) for i, k in enumerate(self.k_ocean))
        return out

    def matrix(self) -> np.ndarray:
        n = len(RESERVOIRS)
        m = np.zeros((n, n))
        eq = self.equilibrium
        for i, j, k in self.pairs():
            back = k * eq[i] / eq[j]
            m[i, i] -= k
            m[j, i] += k
            m[j, j] -= back
            m[i, j] += back
        return m


@dataclass(frozen=True)
class ClimateParameters:
    sensitivity: float = 0.8  # equilibrium K per W/m2
    surface_capacity: float = 10.0
    deep_capacity: Tuple[float, ...] = (40.0, 40.0, 170.0, 105.0)
    exchange: Tuple[float, ...] = (1.1, 0.5, 0.3, 0.15)  # surface->1, 1->2, 2->3, 3->4

    def __post_init__(self) -> None:
        if len(self.exchange) != len(self.deep_capacity):
            raise ValueError("ClimateParameters needs one exchange coefficient per deep layer.")


@dataclass(frozen=True)
class ClimateState:
    concentration: float
    forcing_co2: float
    forcing_other: float
    surface: float
    deep: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "deep", tuple(float(v) for v in self.deep))
        if not self.concentration > 0:
            raise DomainError(f"CO2 concentration must be positive, got {self.concentration}.")
        if not all(math.isfinite(v) for v in (self.surface,) + self.deep):
            raise ValueError("Temperature anomalies must be finite.")


@dataclass(frozen=True)
class BiodiversityState:
    msa: float
    capacity: float

    def __post_init__(self) -> None:
        for name in ("msa", "capacity"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"BiodiversityState.{name} must lie in [0, 1], got {value}.")


# ---------- Sector step operations ----------
def population_step(
    cohorts: CohortGrid,
    births: float,
    mortality: Union[Sequence[float], np.ndarray],
    *,
    male_birth_fraction: float = 0.512,
    dt: float = 1.0,
) -> CohortGrid:
    """Aging chain: each cohort passes 1/5 per year to the next and loses cohort*mortality to deaths."""
    if births < 0:
        raise DomainError(f"Births must be non-negative, got {births}.")
    rates = np.array(mortality, dtype=float)
    if rates.shape == (len(COHORTS),):
        rates = np.vstack([rates, rates])
    if rates.shape != (2, len(COHORTS)):
        raise ValueError(f"Mortality needs {len(COHORTS)} rates (or a male/female pair of rows).")
    if np.any(rates < 0):
        raise DomainError("Mortality rates must be non-negative.")

    out = []
    for row, pop, share in ((0, cohorts.male, male_birth_fraction), (1, cohorts.female, 1.0 - male_birth_fraction)):
        maturation = pop * MATURATION_RATE
        maturation[-1] = 0.0
        deaths = pop * rates[row]
        nxt = pop - dt * (maturation + deaths)
        nxt[1:] += dt * maturation[:-1]
        nxt[0] += dt * births * share
        if np.any(nxt < 0):
            bad = int(np.flatnonzero(nxt < 0)[0])
            raise NegativePopulation(
                f"Cohort {SEXES[row]} {COHORT_LABELS[bad]} would become negative; "
                f"maturation plus mortality exceeds 1/dt."
            )
        out.append(nxt)
    return CohortGrid(out[0], out[1])


def cobb_douglas_gwp(A: float, K: float, L: float, alpha: float) -> float:
    if not (A > 0 and K > 0 and L > 0):
        raise DomainError(f"Cobb-Douglas inputs must be positive (A={A}, K={K}, L={L}).")
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"Capital elasticity must lie in (0, 1), got {alpha}.")
    return float(A * K**alpha * L ** (1.0 - alpha))


def energy_market_shares(costs: Union[Mapping[str, float], Sequence[float]], gamma: float) -> Any:
    """Logit competition: share_i = exp(-gamma c_i) / sum_j exp(-gamma c_j)."""
    if gamma < 0:
        raise DomainError(f"Cost sensitivity must be non-negative, got {gamma}.")
    names = list(costs.keys()) if isinstance(costs, Mapping) else None
    values = np.array(list(costs.values()) if names is not None else list(costs), dtype=float)
    if values.size == 0 or np.any(values <= 0):
        raise DomainError("Energy costs must be positive.")
    shares = softmax(-gamma * values)
    if names is not None:
        return {name: float(s) for name, s in zip(names, shares)}
    return shares


def carbon_step(
    res: CarbonReservoirs,
    emissions: float,
    ccs: float,
    *,
    exchange: CarbonExchange = CarbonExchange(),
    dt: float = 1.0,
) -> CarbonReservoirs:
    """Linear donor-controlled exchange; the atmosphere also gains (emissions - ccs) * dt."""
    if emissions < 0 or ccs < 0:
        raise DomainError("Emissions and CCS must be non-negative.")
    values = res.vector()
    nxt = values.copy()
    eq = exchange.equilibrium
    for i, j, k in exchange.pairs():
        net = k * values[i] - k * eq[i] / eq[j] * values[j]
        nxt[i] -= dt * net
        nxt[j] += dt * net
    nxt[0] += dt * (emissions - ccs)
    if np.any(nxt < 0):
        bad = RESERVOIRS[int(np.flatnonzero(nxt < 0)[0])]
        raise NegativeReservoir(f"Carbon reservoir '{bad}' would become negative.")
    return CarbonReservoirs.from_vector(nxt, energy_emissions=emissions, land_emissions=0.0, ccs=ccs)


def radiative_forcing(C: float, C_pre: float = 277.0, F2x: float = 3.71) -> float:
    if not (C > 0 and C_pre > 0):
        raise DomainError(f"CO2 concentrations must be positive (C={C}, C_pre={C_pre}).")
    return float(F2x * math.log2(C / C_pre))


def temperature_step(
    clim: ClimateState,
    F_total: float,
    *,
    params: ClimateParameters = ClimateParameters(),
    dt: float = 1.0,
) -> ClimateState:
    """Surface box with outgoing-radiation damping and diffusive exchange down the deep-ocean chain."""
    if not math.isfinite(F_total):
        raise DomainError(f"Forcing must be finite, got {F_total}.")
    if len(clim.deep) != len(params.deep_capacity):
        raise ValueError("Climate state and parameters disagree on the number of deep layers.")
    temps = (clim.surface,) + clim.deep
    fluxes = [params.exchange[i] * (temps[i] - temps[i + 1]) for i in range(len(clim.deep))]
    surface = clim.surface + dt * (F_total - clim.surface / params.sensitivity - fluxes[0]) / params.surface_capacity
    deep = []
    for i, capacity in enumerate(params.deep_capacity):
        below = fluxes[i + 1] if i + 1 < len(fluxes) else 0.0
        deep.append(clim.deep[i] + dt * (fluxes[i] - below) / capacity)
    return replace(clim, surface=float(surface), deep=tuple(deep), forcing_other=clim.forcing_other)


def diet_shift_step(state: FoodDietState, contact: float, risk_signal: float, *, dt: float = 1.0) -> FoodDietState:
    """Word-of-mouth plus climate-risk adoption: da/dt = contact a (1-a) + risk (1-a)."""
    if contact < 0 or risk_signal < 0:
        raise DomainError("Contact rate and risk signal must be non-negative.")
    a = state.adopters
    rate = min(contact * a * (1.0 - a) + risk_signal * (1.0 - a), (1.0 - a) / dt)
    return replace(state, adopters=min(1.0, max(0.0, a + dt * rate)))


def msa_step(
    bio: BiodiversityState,
    capacity: float,
    *,
    r_regen: float = 0.02,
    r_ext: float = 0.05,
    dt: float = 1.0,
) -> BiodiversityState:
    if not 0.0 <= capacity <= 1.0:
        raise DomainError(f"Species carrying capacity must lie in [0, 1], got {capacity}.")
    rate = r_regen if capacity >= bio.msa else r_ext
    msa = bio.msa + dt * rate * (capacity - bio.msa)
    return BiodiversityState(msa=float(min(1.0, max(0.0, msa))), capacity=float(capacity))


# ---------- Parameter registry ----------
@dataclass(frozen=True)
class RegistryEntry:
    name: str
    sector: str
    group: str
    units: str = ""
    nominal: Optional[float] = None
    knots: Optional[Knots] = None
    low: Optional[float] = None
    high: Optional[float] = None
    screen: bool = False
    description: str = ""

    @property
    def is_table(self) -> bool:
        return self.knots is not None

    def admits(self, value: float) -> bool:
        if self.low is None or self.high is None:
            return True
        return self.low <= value <= self.high


@dataclass(frozen=True)
class ParameterSet:
    """Scalar parameter values and table knots, keyed by registry name."""

    scalars: Mapping[str, float]
    tables: Mapping[str, Knots]

    def __contains__(self, name: object) -> bool:
        return name in self.scalars or name in self.tables

    def __getitem__(self, name: str) -> Union[float, Knots]:
        if name in self.scalars:
            return self.scalars[name]
        return self.tables[name]

    @property
    def names(self) -> List[str]:
        return sorted(set(self.scalars) | set(self.tables))

    def with_values(self, values: Mapping[str, Union[float, Knots]]) -> "ParameterSet":
        scalars = dict(self.scalars)
        tables = dict(self.tables)
        for name, value in values.items():
            if isinstance(value, (int, float)):
                scalars[name] = float(value)
            else:
                tables[name] = tuple((float(x), float(y)) for x, y in value)
        return ParameterSet(scalars, tables)

    def without(self, *names: str) -> "ParameterSet":
        return ParameterSet(
            {k: v for k, v in self.scalars.items() if k not in names},
            {k: v for k, v in self.tables.items() if k not in names},
        )

    def differences(self, other: "ParameterSet") -> List[str]:
        out = []
        for name in sorted(set(self.names) | set(other.names)):
            mine = self[name] if name in self else None
            theirs = other[name] if name in other else None
            if mine != theirs:
                out.append(name)
        return out


@dataclass(frozen=True)
class ParameterRegistry:
    entries: Mapping[str, RegistryEntry]
    source: Optional[Path] = None

    def __contains__(self, name: object) -> bool:
        return name in self.entries

    def __getitem__(self, name: str) -> RegistryEntry:
        return self.entries[name]

    @property
    def names(self) -> List[str]:
        return list(self.entries.keys())

    def nominal_set(self) -> ParameterSet:
        scalars = {e.name: float(e.nominal) for e in self.entries.values() if not e.is_table}
        tables = {e.name: e.knots for e in self.entries.values() if e.is_table}
        return ParameterSet(scalars, tables)

    def screen_candidates(self) -> List[RegistryEntry]:
        return [e for e in self.entries.values() if e.screen and not e.is_table]


def read_table_csv(path: Union[str, Path], value_column: Optional[str] = None) -> Knots:
    """Two-column CSV (x, y) as table knots."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    except (OSError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise ParseError(f"Cannot read table series: {exc}", path=path) from exc
    if frame.shape[1] < 2:
        raise ParseError("Table series needs an x column and a value column.", path=path)
    column = value_column or frame.columns[1]
    if column not in frame.columns:
        raise ParseError(f"Missing column '{column}'.", path=path)
    xs = pd.to_numeric(frame.iloc[:, 0], errors="coerce")
    ys = pd.to_numeric(frame[column], errors="coerce")
    if xs.isna().any() or ys.isna().any():
        bad = int(np.flatnonzero((xs.isna() | ys.isna()).to_numpy())[0])
        raise ParseError("Non-numeric value.", path=path, line=bad + 2)
    knots = tuple(zip(xs.astype(float).tolist(), ys.astype(float).tolist()))
    validate_knots(str(path.name), knots)
    return knots


def _registry_entry(raw: Mapping[str, Any], base_dir: Path, path: Path) -> RegistryEntry:
    name = str(raw.get("name", "")).strip()
    if not name:
        raise ParseError("Registry entry without a name.", path=path)
    knots: Optional[Knots] = None
    nominal: Optional[float] = None
    if "knots" in raw:
        knots = tuple((float(x), float(y)) for x, y in raw["knots"])
        validate_knots(name, knots)
    elif "source" in raw:
        knots = read_table_csv(base_dir / str(raw["source"]))
    elif "nominal" in raw:
        nominal = float(raw["nominal"])
    else:
        raise ParseError(f"Registry entry '{name}' needs 'nominal', 'knots' or 'source'.", path=path)

    low = high = None
    if raw.get("range") is not None:
        low, high = (float(v) for v in raw["range"])
        if low > high:
            raise ParseError(f"Registry entry '{name}' has range low > high.", path=path)
        if nominal is not None and not low <= nominal <= high:
            raise ParseError(f"Registry nominal of '{name}' ({nominal}) is outside its range.", path=path)
    return RegistryEntry(
        name=name,
        sector=str(raw.get("sector", "")),
        group=str(raw.get("group", raw.get("sector", ""))),
        units=str(raw.get("units", "")),
        nominal=nominal,
        knots=knots,
        low=low,
        high=high,
        screen=bool(raw.get("screen", False)),
        description=str(raw.get("description", "")),
    )


def load_registry(path: Union[str, Path, None] = None) -> ParameterRegistry:
    path = Path(path) if path is not None else REGISTRY_JSON
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno) from exc
    except OSError as exc:
        raise ParseError(f"Cannot read parameter registry: {exc}", path=path) from exc
    items = payload.get("parameters") if isinstance(payload, dict) else payload
    if not isinstance(items, list):
        raise ParseError("Parameter registry must be a list of entries.", path=path)

    entries: Dict[str, RegistryEntry] = {}
    for raw in items:
        if not isinstance(raw, dict):
            raise ParseError("Registry entries must be objects.", path=path)
        try:
            entry = _registry_entry(raw, path.parent, path)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, (ParseError, InvalidTable)):
                raise
            raise ParseError(f"Malformed registry entry {raw.get('name', '?')}: {exc}", path=path) from exc
        if entry.name in entries:
            raise DuplicateName(f"Parameter '{entry.name}' is registered twice in {path}.")
        entries[entry.name] = entry
    logger.debug("Loaded %d registry entries from %s", len(entries), path)
    return ParameterRegistry(entries, source=path)


# ---------- World model assembly ----------
# variables the indicator catalog, the entry points and the snapshots read
WORLD_OUTPUTS = (
    "population.total", "population.life_expectancy", "population.under5_mortality", "population.births",
    "population.deaths", "education.no_education_share", "education.secondary_share", "education.tertiary_share",
    "education.mean_years", "economy.gwp", "economy.gwp_per_capita", "economy.labor_productivity", "economy.hdi",
    "energy.demand", "energy.fossil_production", "energy.renewable_share", "energy.total_production",
    "energy.intensity", "energy.coal.production", "energy.oil.production", "energy.gas.production",
    "energy.biomass.production", "energy.wind.production", "energy.solar.production", "water.scarcity",
    "land.cropland_pasture", "land.cropland", "land.pasture", "land.forest", "land.crop_yield",
    "land.n_fertilizer", "land.p_fertilizer", "land.agriculture_co2", "food.animal_intake", "food.supply_total",
    "food.undernourishment", "food.waste", "carbon.emissions", "carbon.co2_emissions", "carbon.atmospheric_ppm",
    "climate.forcing_total", "climate.forcing_co2", "climate.temperature", "biodiversity.msa",
)

# projection shape for cross-model comparison
CONTROL_VARIABLES = (
    "population.total", "economy.gwp", "energy.demand", "food.supply_total", "land.forest",
    "carbon.co2_emissions", "climate.temperature",
)


class _WorldBuilder:
    def __init__(self) -> None:
        self.stocks: List[Stock] = []
        self.auxiliaries: List[Auxiliary] = []
        self.flows: List[Flow] = []

    def stock(self, name: str, initial: Union[float, str], units: str = "") -> str:
        self.stocks.append(Stock(name, initial, units))
        return name

    def aux(self, name: str, expression: str, units: str = "") -> str:
        self.auxiliaries.append(Auxiliary(name, expression, units))
        return name

    def flow(self, name: str, rate: str, source: Optional[str] = None, sink: Optional[str] = None, units: str = "") -> str:
        self.flows.append(Flow(name, rate, source, sink, units))
        return name

    def expressions(self) -> Iterable[Union[str, float]]:
        for s in self.stocks:
            yield s.initial
        for a in self.auxiliaries:
            yield a.expression
        for f in self.flows:
            yield f.rate

    def declared(self) -> set:
        return {s.name for s in self.stocks} | {a.name for a in self.auxiliaries} | {f.name for f in self.flows}


def _total(names: Iterable[str]) -> str:
    return " + ".join(names)


def _population(b: _WorldBuilder) -> None:
    shares = initial_cohort_shares()
    b.aux(
        "population.mortality_multiplier",
        "mortality.scale * mortality.income_table(economy.gwp_per_capita) * mortality.food_table(food.availability)"
        " * (1 + mortality.climate_sensitivity * max(0, climate.temperature - 1))",
    )
    b.aux("population.female_reproductive", _total(f"population.f.{c}" for c in REPRODUCTIVE), "persons")
    b.aux("population.tfr", "fertility.scale * fertility.table(economy.gwp_per_capita) * education.fertility_effect")
    b.aux("population.births", "population.tfr * population.female_reproductive / 35", "persons/yr")
    for sex in SEXES:
        factor = "mortality.male_factor" if sex == "m" else "mortality.female_factor"
        birth_share = "population.male_birth_fraction" if sex == "m" else "(1 - population.male_birth_fraction)"
        for i, c in enumerate(COHORTS):
            stock = b.stock(f"population.{sex}.{c}", f"population.initial_total * {shares[sex][i]!r}", "persons")
            cap = 1.0 if c == COHORTS[-1] else MORTALITY_CAP
            rate = b.aux(
                f"population.{sex}.mortality.{c}",
                f"min({cap!r}, {BASE_MORTALITY[i]!r} * {factor} * population.mortality_multiplier)",
                "1/yr",
            )
            b.flow(f"population.{sex}.deaths.{c}", f"{stock} * {rate}", source=stock, units="persons/yr")
            if i + 1 < len(COHORTS):
                b.flow(
                    f"population.{sex}.maturation.{c}",
                    f"{stock} * {MATURATION_RATE!r}",
                    source=stock,
                    sink=f"population.{sex}.{COHORTS[i + 1]}",
                    units="persons/yr",
                )
        b.flow(f"population.{sex}.births", f"population.births * {birth_share}", sink=f"population.{sex}.c00", units="persons/yr")
        b.aux(f"population.{sex}.total", _total(f"population.{sex}.{c}" for c in COHORTS), "persons")
        b.aux(f"population.{sex}.adults", _total(f"population.{sex}.{c}" for c in ADULT), "persons")
        b.aux(f"population.{sex}.adult_deaths", _total(f"population.{sex}.deaths.{c}" for c in ADULT), "persons/yr")
    b.aux("population.total", "population.m.total + population.f.total", "persons")
    b.aux("population.adults", "population.m.adults + population.f.adults", "persons")
    b.aux(
        "population.working_age",
        _total(f"population.{sex}.{c}" for sex in SEXES for c in WORKING_AGE),
        "persons",
    )
    b.aux(
        "population.deaths",
        _total(f"population.{sex}.deaths.{c}" for sex in SEXES for c in COHORTS),
        "persons/yr",
    )

    # period life expectancy from exponential survival within each five-year cohort
    terms = []
    for i, c in enumerate(COHORTS):
        rate = b.aux(f"population.mortality.{c}", f"0.5 * (population.m.mortality.{c} + population.f.mortality.{c})", "1/yr")
        if i == 0:
            b.aux(f"population.survival.{c}", "1")
        else:
            prev = COHORTS[i - 1]
            b.aux(f"population.survival.{c}", f"population.survival.{prev} * exp(-5 * population.mortality.{prev})")
        if i + 1 < len(COHORTS):
            terms.append(f"population.survival.{c} * (1 - exp(-5 * {rate})) / {rate}")
        else:
            terms.append(f"population.survival.{c} / {rate}")
    b.aux("population.life_expectancy", _total(terms), "years")
    b.aux("population.under5_mortality", "1000 * (1 - exp(-5 * population.mortality.c00))", "per 1000 births")


def _education(b: _WorldBuilder) -> None:
    b.aux("education.primary_completion", "clip(education.scale * education.primary_table(economy.gwp_per_capita), 0, 1)")
    b.aux(
        "education.secondary_completion",
        "min(education.primary_completion, clip(education.scale * education.secondary_table(economy.gwp_per_capita), 0, 1))",
    )
    b.aux(
        "education.tertiary_completion",
        "min(education.secondary_completion, clip(education.scale * education.tertiary_table(economy.gwp_per_capita), 0, 1))",
    )
    entry = {
        "none": "1 - education.primary_completion",
        "primary": "education.primary_completion - education.secondary_completion",
        "secondary": "education.secondary_completion - education.tertiary_completion",
        "tertiary": "education.tertiary_completion",
    }
    shares = initial_cohort_shares()
    for sex in SEXES:
        adults = sum(shares[sex][3:])
        rate = b.aux(
            f"education.{sex}.adult_death_rate",
            f"population.{sex}.adult_deaths / max(population.{sex}.adults, 1)",
            "1/yr",
        )
        for level in EDUCATION_LEVELS:
            initial = adults * LEVEL_SHARES_2015[sex][level]
            stock = b.stock(f"education.{sex}.{level}", f"population.initial_total * {initial!r}", "persons")
            b.flow(
                f"education.{sex}.entry.{level}",
                f"population.{sex}.maturation.c02 * ({entry[level]})",
                sink=stock,
                units="persons/yr",
            )
            b.flow(f"education.{sex}.exit.{level}", f"{stock} * {rate}", source=stock, units="persons/yr")
    for level in EDUCATION_LEVELS:
        b.aux(f"education.{level}", f"education.m.{level} + education.f.{level}", "persons")
    b.aux("education.no_education_share", "education.none / population.adults")
    b.aux("education.secondary_share", "(education.secondary + education.tertiary) / population.adults")
    b.aux("education.tertiary_share", "education.tertiary / population.adults")
    schooling = _total(f"{SCHOOLING_YEARS[l]!r} * education.{l}" for l in EDUCATION_LEVELS[1:])
    b.aux("education.mean_years", f"({schooling}) / population.adults", "years")
    b.aux("education.labor_effect", f"exp(education.return_rate * (education.mean_years - {SCHOOLING_2015!r}))")
    b.aux("education.fertility_effect", "education.fertility_table(education.secondary_share)")


def _economy(b: _WorldBuilder) -> None:
    labor_2015 = f"population.initial_total * {WORKING_AGE_SHARE_2015!r} * population.participation_rate / 1e9"
    b.stock("economy.capital_energy", "economy.initial_capital * economy.energy_investment_share", "T$")
    b.stock("economy.capital_other", "economy.initial_capital * (1 - economy.energy_investment_share)", "T$")
    b.stock(
        "economy.productivity",
        f"economy.gwp_2015 / (economy.initial_capital ** economy.alpha * ({labor_2015}) ** (1 - economy.alpha))",
    )
    b.aux("economy.capital", "economy.capital_energy + economy.capital_other", "T$")
    b.aux("economy.labor", "population.working_age * population.participation_rate * education.labor_effect / 1e9", "billion workers")
    b.aux("economy.damage", "max(0.05, 1 - economy.damage_scale * (1 - economy.damage_table(climate.temperature)))")
    b.aux("economy.ecosystem_effect", "economy.ecosystem_table(biodiversity.msa)")
    b.aux(
        "economy.gwp",
        "economy.damage * economy.ecosystem_effect * economy.productivity"
        " * economy.capital ** economy.alpha * economy.labor ** (1 - economy.alpha)",
        "T$/yr",
    )
    b.aux("economy.gwp_per_capita", "economy.gwp * 1e9 / population.total", "k$/person/yr")
    b.aux(
        "economy.labor_productivity",
        "economy.gwp * 1e9 / (population.working_age * population.participation_rate)",
        "k$/worker/yr",
    )
    b.aux("economy.investment", "economy.savings_rate * economy.gwp", "T$/yr")
    b.aux("economy.tfp_growth", "economy.tfp_scale * economy.tfp_growth_table(time)", "1/yr")
    b.flow("economy.investment_energy", "economy.investment * economy.energy_investment_share", sink="economy.capital_energy")
    b.flow("economy.investment_other", "economy.investment * (1 - economy.energy_investment_share)", sink="economy.capital_other")
    b.flow("economy.depreciation_energy", "economy.capital_energy * economy.depreciation", source="economy.capital_energy")
    b.flow("economy.depreciation_other", "economy.capital_other * economy.depreciation", source="economy.capital_other")
    b.flow("economy.productivity_growth", "economy.productivity * economy.tfp_growth", sink="economy.productivity")

    b.aux("economy.life_index", "clip((population.life_expectancy - 20) / 65, 0.01, 1)")
    b.aux("economy.education_index", "clip(education.mean_years / 15, 0.01, 1)")
    b.aux("economy.income_index", "clip((ln(economy.gwp_per_capita * 1000) - ln(100)) / (ln(75000) - ln(100)), 0.01, 1)")
    b.aux("economy.hdi", "(economy.life_index * economy.education_index * economy.income_index) ** (1 / 3)")


def _energy(b: _WorldBuilder) -> None:
    b.aux(
        "energy.per_capita_demand",
        "energy.demand_scale * energy.demand_table(economy.gwp_per_capita) * exp(-energy.efficiency_rate * (time - 2015))",
        "GJ/person/yr",
    )
    b.aux("energy.demand", "population.total * energy.per_capita_demand / 1e9", "EJ/yr")
    b.aux("energy.carbon_price", "climate_policy.carbon_price_2100 * clip((time - 2020) / 80, 0, 1)", "$/tCO2")
    b.aux("energy.ccs_fraction", "climate_policy.ccs_max_fraction * climate_policy.ccs_ramp(time)")
    b.aux("energy.required_capital", "energy.demand * energy.capital_intensity", "T$")
    b.aux("energy.investment_effect", "energy.investment_effect_table(economy.capital_energy / energy.required_capital)")

    for src in FOSSIL_SOURCES:
        resource = b.stock(f"energy.{src}.resource", f"energy.{src}.initial_resource", "EJ")
        b.aux(
            f"energy.{src}.cost",
            f"energy.{src}.base_cost * energy.depletion_table({resource} / energy.{src}.initial_resource)"
            f" + energy.carbon_price * energy.{src}.carbon_intensity * 44 / 12 * (1 - energy.ccs_fraction)",
            "$/GJ",
        )
    for src in RENEWABLE_SOURCES:
        cumulative = b.stock(f"energy.{src}.cumulative", f"energy.{src}.initial_cumulative", "EJ")
        b.aux(
            f"energy.{src}.cost",
            f"energy.{src}.base_cost * ({cumulative} / energy.{src}.initial_cumulative) ** (-energy.{src}.learning_exponent)"
            " * exp(-energy.renewable_cost_decline * (time - 2015))",
            "$/GJ",
        )

    b.aux("energy.min_cost", "min(" + ", ".join(f"energy.{s}.cost" for s in ENERGY_SOURCES) + ")", "$/GJ")
    for src in ENERGY_SOURCES:
        b.aux(f"energy.{src}.attractiveness", f"exp(-energy.logit_gamma * (energy.{src}.cost - energy.min_cost))")
    b.aux("energy.attractiveness_total", _total(f"energy.{s}.attractiveness" for s in ENERGY_SOURCES))
    for src in ENERGY_SOURCES:
        b.aux(f"energy.{src}.target_share", f"energy.{src}.attractiveness / energy.attractiveness_total")
        share = b.stock(f"energy.{src}.share", ENERGY_SHARES_2015[src])
        b.flow(
            f"energy.{src}.share_adjustment",
            f"(energy.{src}.target_share - {share}) / energy.share_adjustment_time",
            sink=share,
        )

    for src in FOSSIL_SOURCES:
        resource = f"energy.{src}.resource"
        production = b.aux(
            f"energy.{src}.production",
            f"min(energy.demand * energy.{src}.share * energy.investment_effect, {resource} / energy.min_depletion_years)",
            "EJ/yr",
        )
        b.flow(f"energy.{src}.extraction", production, source=resource, units="EJ/yr")
        b.flow(
            f"energy.{src}.discovery",
            f"{production} * energy.discovery_scale * energy.discovery_table(time)",
            sink=resource,
            units="EJ/yr",
        )
    for src in RENEWABLE_SOURCES:
        production = b.aux(f"energy.{src}.production", f"energy.demand * energy.{src}.share", "EJ/yr")
        b.flow(f"energy.{src}.accumulation", production, sink=f"energy.{src}.cumulative", units="EJ/yr")

    b.aux("energy.fossil_production", _total(f"energy.{s}.production" for s in FOSSIL_SOURCES), "EJ/yr")
    b.aux("energy.renewable_production", _total(f"energy.{s}.production" for s in RENEWABLE_SOURCES), "EJ/yr")
    b.aux("energy.total_production", "energy.fossil_production + energy.renewable_production", "EJ/yr")
    b.aux("energy.renewable_share", "energy.renewable_production / energy.total_production")
    b.aux("energy.intensity", "energy.total_production / economy.gwp", "EJ/T$")
    b.aux(
        "energy.fossil_emissions",
        _total(f"energy.{s}.production * energy.{s}.carbon_intensity" for s in FOSSIL_SOURCES),
        "GtC/yr",
    )
    b.aux("energy.ccs", "energy.fossil_emissions * energy.ccs_fraction", "GtC/yr")


def _water(b: _WorldBuilder) -> None:
    b.aux("water.efficiency", "exp(-water.efficiency_rate * (time - 2015))")
    b.aux("water.agriculture", "land.cropland * water.irrigation_intensity * water.efficiency", "km3/yr")
    b.aux("water.industry", "energy.total_production * water.industry_intensity * water.efficiency", "km3/yr")
    b.aux("water.domestic", "population.total * water.domestic_per_capita / 1e9", "km3/yr")
    b.aux("water.withdrawal", "water.agriculture + water.industry + water.domestic", "km3/yr")
    b.aux(
        "water.supply",
        "water.accessible_resource * water.drought_table(climate.temperature) + water.recovery_fraction * water.withdrawal",
        "km3/yr",
    )
    b.aux("water.scarcity", "water.withdrawal / water.supply")
    b.aux("water.yield_effect", "water.yield_table(water.scarcity)")


def _transfer(b: _WorldBuilder, donor: str, receiver: str, demand: str) -> str:
    """Land conversion limited to a fixed fraction of the donor class per year."""
    return b.flow(
        f"land.{donor}_to_{receiver}",
        f"min({demand}, land.max_conversion_fraction * land.{donor})",
        source=f"land.{donor}",
        sink=f"land.{receiver}",
        units="Gha/yr",
    )


def _land(b: _WorldBuilder) -> None:
    for cls in LAND_CLASSES:
        b.stock(f"land.{cls}", LAND_2015[cls], "Gha")
    b.aux("land.total", _total(f"land.{c}" for c in LAND_CLASSES), "Gha")
    b.aux("land.cropland", "land.arable + land.permanent_crops", "Gha")
    b.aux("land.cropland_pasture", "land.cropland + land.pasture", "Gha")

    b.aux("land.fertilizer_intensity", "land.fertilizer_table(time)")
    b.aux("land.n_fertilizer", "land.n_rate * land.fertilizer_intensity * land.cropland", "Mt N/yr")
    b.aux("land.p_fertilizer", "land.p_rate * land.fertilizer_intensity * land.cropland", "Mt P/yr")
    b.aux("land.fertilizer_effect", "land.fertilizer_effect_table(land.n_rate * land.fertilizer_intensity / 70)")
    b.aux("land.climate_effect", "land.climate_yield_table(climate.temperature)")
    b.aux("land.co2_effect", "1 + land.co2_fertilization * ln(carbon.atmospheric_ppm / 400)")
    b.aux("land.management_effect", "land.management_table(economy.gwp_per_capita)")
    b.aux(
        "land.crop_yield",
        "land.yield_2015 * land.productivity_scale * land.yield_tech_table(time) * land.fertilizer_effect"
        " * water.yield_effect * land.climate_effect * land.co2_effect * land.management_effect",
        "t/ha/yr",
    )
    # 1 Gha at 1 t/ha and 3.6e6 kcal/t gives 3.6 Pkcal
    b.aux("land.crop_production", "land.cropland * land.crop_yield * 3.6", "Pkcal/yr")
    b.aux(
        "land.crop_demand",
        "population.total * 365 * (food.plant.supply + land.feed_conversion * food.crop_animal_supply)"
        " * (1 + land.nonfood_fraction) / 1e15",
        "Pkcal/yr",
    )
    b.aux("land.cropland_desired", "land.crop_demand / (land.crop_yield * 3.6)", "Gha")
    b.aux("land.crop_gap", "land.cropland_desired - land.cropland", "Gha")
    b.aux("land.pasture_demand", "population.total * 365 * food.pasture_animal_supply / 1e15", "Pkcal/yr")
    b.aux("land.pasture_desired", "land.pasture_demand / (land.pasture_productivity * land.management_effect)", "Gha")
    b.aux("land.pasture_gap", "land.pasture_desired - land.pasture", "Gha")
    b.aux("land.urban_gap", "population.total * land.urban_per_capita - land.urban", "Gha")

    expand = "max(0, land.{gap}) * {share} / land.adjustment_time"
    _transfer(b, "forest", "arable", expand.format(gap="crop_gap", share="land.forest_expansion_share"))
    _transfer(b, "other", "arable", expand.format(gap="crop_gap", share="(1 - land.forest_expansion_share)"))
    _transfer(b, "arable", "other", "max(0, -land.crop_gap) / land.adjustment_time")
    _transfer(b, "forest", "pasture", expand.format(gap="pasture_gap", share="land.forest_expansion_share"))
    _transfer(b, "other", "pasture", expand.format(gap="pasture_gap", share="(1 - land.forest_expansion_share)"))
    _transfer(b, "pasture", "other", "max(0, -land.pasture_gap) / land.adjustment_time")
    _transfer(b, "other", "urban", "max(0, land.urban_gap) / land.adjustment_time")
    _transfer(b, "other", "forest", "climate_policy.afforestation_rate")

    b.aux("land.deforestation", "land.forest_to_arable + land.forest_to_pasture", "Gha/yr")
    b.aux("land.use_emissions", "land.deforestation * land.forest_carbon_density", "GtC/yr")
    b.aux(
        "land.agriculture_co2",
        "land.ag_n_emission * land.n_fertilizer + land.ag_pasture_emission * land.pasture",
        "GtCO2e/yr",
    )


def _food(b: _WorldBuilder) -> None:
    adopters = b.stock("food.sustainable_diet_share", "diet.initial_adopters")
    b.aux("diet.contact", f"diet.contact_rate * (0.5 + 0.5 * education.tertiary_share / {TERTIARY_2015!r})", "1/yr")
    b.aux("diet.risk", "diet.risk_sensitivity * max(0, climate.temperature - diet.risk_threshold)", "1/yr")
    b.flow(
        "food.diet_adoption",
        f"min(diet.contact * {adopters} * (1 - {adopters}) + diet.risk * (1 - {adopters}), (1 - {adopters}) / dt)",
        sink=adopters,
    )
    b.aux("food.waste", "food.waste_fraction * (1 - food.waste_reduction * clip((time - 2020) / 30, 0, 1))")
    for cat in FOOD_CATEGORIES:
        b.aux(f"food.{cat}.conventional", f"diet.{cat}_table(economy.gwp_per_capita)", "kcal/person/day")
        b.aux(
            f"food.{cat}.demand",
            f"(1 - {adopters}) * food.{cat}.conventional + {adopters} * diet.sustainable.{cat}",
            "kcal/person/day",
        )
        b.aux(f"food.{cat}.supply", f"food.{cat}.demand / (1 - food.waste)", "kcal/person/day")
    b.aux("food.crop_animal_supply", "food.crop_meat.supply + 0.5 * food.dairy_eggs.supply", "kcal/person/day")
    b.aux("food.pasture_animal_supply", "food.pasture_meat.supply + 0.5 * food.dairy_eggs.supply", "kcal/person/day")
    b.aux("food.animal_intake", "food.crop_meat.demand + food.pasture_meat.demand + food.dairy_eggs.demand", "kcal/person/day")
    b.aux("food.intake", "food.animal_intake + food.plant.demand", "kcal/person/day")
    b.aux("food.supply_total", _total(f"food.{c}.supply" for c in FOOD_CATEGORIES), "kcal/person/day")
    b.aux("food.self_sufficiency", "land.crop_production / land.crop_demand")
    b.aux("food.availability", "food.intake / food.reference_intake * min(1, food.self_sufficiency)")
    b.aux("food.undernourishment", "food.undernourishment_table(food.intake * min(1, food.self_sufficiency))")


def _carbon(b: _WorldBuilder) -> None:
    for name, initial in zip(RESERVOIRS, RESERVOIRS_2015):
        b.stock(f"carbon.{name}", initial, "GtC")
    b.stock("carbon.cumulative_emissions", 0.0, "GtC")
    b.aux("carbon.emissions", "energy.fossil_emissions + land.use_emissions", "GtC/yr")
    b.aux("carbon.net_emissions", "carbon.emissions - energy.ccs", "GtC/yr")
    b.aux("carbon.co2_emissions", "carbon.net_emissions * 44 / 12", "GtCO2/yr")
    b.aux("carbon.atmospheric_ppm", "carbon.atmosphere / carbon.gtc_per_ppm", "ppm")
    b.aux("carbon.total", _total(f"carbon.{r}" for r in RESERVOIRS), "GtC")
    b.aux("carbon.bio_exchange_rate", "carbon.k_atm_bio * biodiversity.forest_fertility * land.forest / 4.0", "1/yr")

    b.flow("carbon.emission", "carbon.emissions", sink="carbon.atmosphere", units="GtC/yr")
    b.flow("carbon.capture", "energy.ccs", source="carbon.atmosphere", units="GtC/yr")
    b.flow("carbon.accounting", "carbon.net_emissions", sink="carbon.cumulative_emissions", units="GtC/yr")

    # donor-controlled pairs; reverse coefficients keep the preindustrial pools in balance
    pairs = [("atmosphere", "ocean_1", "carbon.k_atm_ocean"), ("atmosphere", "biosphere", "carbon.bio_exchange_rate")]
    pairs += [(f"ocean_{i}", f"ocean_{i + 1}", f"carbon.k_ocean_{i}") for i in range(1, 5)]
    for donor, receiver, k in pairs:
        b.flow(f"carbon.{donor}_to_{receiver}", f"{k} * carbon.{donor}", source=f"carbon.{donor}", sink=f"carbon.{receiver}")
        b.flow(
            f"carbon.{receiver}_to_{donor}",
            f"{k} * carbon.preindustrial.{donor} / carbon.preindustrial.{receiver} * carbon.{receiver}",
            source=f"carbon.{receiver}",
            sink=f"carbon.{donor}",
        )


def _climate(b: _WorldBuilder) -> None:
    layers = ["temperature"] + [f"deep_{i}" for i in range(1, DEEP_LAYERS + 1)]
    for name, initial in zip(layers, TEMPERATURE_2015):
        b.stock(f"climate.{name}", initial, "K")
    b.aux("climate.forcing_co2", "climate.f2x * ln(carbon.atmospheric_ppm / climate.preindustrial_ppm) / ln(2)", "W/m2")
    b.aux("climate.forcing_other", "climate.non_co2_forcing(time)", "W/m2")
    b.aux("climate.forcing_total", "climate.forcing_co2 + climate.forcing_other", "W/m2")
    for i in range(DEEP_LAYERS):
        b.aux(
            f"climate.heat_exchange_{i}",
            f"climate.exchange_{i} * (climate.{layers[i]} - climate.{layers[i + 1]})",
            "W/m2",
        )
    b.flow(
        "climate.surface_warming",
        "(climate.forcing_total - climate.temperature / climate.sensitivity - climate.heat_exchange_0) / climate.surface_capacity",
        sink="climate.temperature",
        units="K/yr",
    )
    for i in range(1, DEEP_LAYERS + 1):
        below = f" - climate.heat_exchange_{i}" if i < DEEP_LAYERS else ""
        b.flow(
            f"climate.deep_{i}_warming",
            f"(climate.heat_exchange_{i - 1}{below}) / climate.deep_capacity_{i}",
            sink=f"climate.deep_{i}",
            units="K/yr",
        )


def _biodiversity(b: _WorldBuilder) -> None:
    msa = b.stock("biodiversity.msa", "biodiversity.initial_msa")
    weighted = _total(f"biodiversity.weight.{c} * land.{c}" for c in LAND_CLASSES)
    b.aux("biodiversity.land_capacity", f"({weighted}) / land.total")
    b.aux("biodiversity.climate_effect", "biodiversity.climate_table(climate.temperature)")
    b.aux("biodiversity.capacity", "clip(biodiversity.land_capacity * biodiversity.climate_effect, 0, 1)")
    b.aux("biodiversity.forest_fertility", f"biodiversity.fertility_table({msa})")
    b.flow(
        "biodiversity.msa_change",
        f"if_then_else(biodiversity.capacity >= {msa}, biodiversity.regeneration_rate, biodiversity.extinction_rate)"
        f" * (biodiversity.capacity - {msa})",
        sink=msa,
        units="1/yr",
    )


SECTOR_BUILDERS = (_population, _education, _economy, _energy, _water, _land, _food, _carbon, _climate, _biodiversity)


def assemble_world_model(params: ParameterSet, *, name: str = "world") -> ModelDefinition:
    """Wire the ten sectors into one ModelDefinition over the given parameter set."""
    b = _WorldBuilder()
    for build in SECTOR_BUILDERS:
        build(b)

    declared = b.declared()
    required: set = set()
    for text in b.expressions():
        required |= expression_symbols(text)
    missing = sorted(required - declared - set(params.names))
    if missing:
        raise MissingParameter(f"Parameter set lacks: {', '.join(missing)}")
    absent = [v for v in WORLD_OUTPUTS if v not in declared]
    if absent:
        raise MissingOutput(f"World model does not define: {', '.join(absent)}")

    parameters = [Parameter(n, v) for n, v in sorted(params.scalars.items()) if n in required]
    tables = [Table(n, k) for n, k in sorted(params.tables.items()) if n in required]
    return ModelDefinition(b.stocks, b.auxiliaries, b.flows, parameters, tables, name=name)


def compile_world(params: ParameterSet, *, name: str = "world") -> ExecutableModel:
    return compile_model(assemble_world_model(params, name=name))


# ---------- Snapshots ----------
@dataclass(frozen=True)
class WorldSnapshot:
    year: float
    cohorts: CohortGrid
    education: EducationState
    economy: EconomyState
    energy: EnergyState
    water: WaterState
    land: LandAccount
    food: FoodDietState
    carbon: CarbonReservoirs
    climate: ClimateState
    biodiversity: BiodiversityState


def snapshot_states(trajectory: Trajectory, year: float) -> WorldSnapshot:
    """Typed sector states of a world trajectory at one grid year; state invariants are checked."""

    def v(name: str) -> float:
        if name not in trajectory:
            raise MissingOutput(f"Trajectory does not record '{name}'.")
        return trajectory.at(name, year)

    cohorts = CohortGrid(
        [v(f"population.m.{c}") for c in COHORTS],
        [v(f"population.f.{c}") for c in COHORTS],
    )
    education = EducationState(
        {l: (v(f"education.m.{l}"), v(f"education.f.{l}")) for l in EDUCATION_LEVELS},
        enrollment_rate=v("education.primary_completion"),
        graduation_rate=v("education.secondary_completion"),
    )
    economy = EconomyState(
        v("economy.capital_energy"), v("economy.capital_other"), v("economy.productivity"),
        v("economy.labor"), v("economy.gwp"), v("economy.gwp_per_capita"),
    )
    sources = {}
    for src in ENERGY_SOURCES:
        stock = f"energy.{src}.resource" if src in FOSSIL_SOURCES else f"energy.{src}.cumulative"
        sources[src] = EnergySourceState(src, v(f"energy.{src}.cost"), v(stock), v(f"energy.{src}.share"), v(f"energy.{src}.production"))
    energy = EnergyState(sources, v("energy.demand"))
    water = WaterState(v("water.agriculture"), v("water.industry"), v("water.domestic"), v("water.supply"))
    land = LandAccount(
        {c: v(f"land.{c}") for c in LAND_CLASSES}, v("land.crop_yield"), v("land.n_fertilizer"), v("land.p_fertilizer")
    )
    food = FoodDietState(
        {c: v(f"food.{c}.supply") for c in FOOD_CATEGORIES},
        {c: v(f"food.{c}.demand") for c in FOOD_CATEGORIES},
        v("food.waste"),
        v("food.sustainable_diet_share"),
    )
    carbon = CarbonReservoirs(
        v("carbon.atmosphere"), v("carbon.biosphere"), tuple(v(f"carbon.{r}") for r in RESERVOIRS[2:]),
        energy_emissions=v("energy.fossil_emissions"), land_emissions=v("land.use_emissions"), ccs=v("energy.ccs"),
    )
    climate = ClimateState(
        v("carbon.atmospheric_ppm"), v("climate.forcing_co2"), v("climate.forcing_other"),
        v("climate.temperature"), tuple(v(f"climate.deep_{i}") for i in range(1, DEEP_LAYERS + 1)),
    )
    biodiversity = BiodiversityState(v("biodiversity.msa"), v("biodiversity.capacity"))
    return WorldSnapshot(year, cohorts, education, economy, energy, water, land, food, carbon, climate, biodiversity)
