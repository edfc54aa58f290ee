from __future__ import annotations

import json
import math
from pathlib import Path
import tempfile
import unittest

import numpy as np
from scipy.linalg import expm

from engine import TimeGrid, run
from errors import DomainError, DuplicateName, MissingParameter, NegativePopulation, ParseError
from sectors import (
    COHORTS,
    LAND_2015,
    WORLD_OUTPUTS,
    BiodiversityState,
    CarbonExchange,
    CarbonReservoirs,
    ClimateParameters,
    ClimateState,
    CohortGrid,
    FoodDietState,
    assemble_world_model,
    carbon_step,
    cobb_douglas_gwp,
    compile_world,
    diet_shift_step,
    energy_market_shares,
    load_registry,
    msa_step,
    population_step,
    radiative_forcing,
    snapshot_states,
    temperature_step,
)


def _diet(adopters: float) -> FoodDietState:
    return FoodDietState({}, {}, 0.3, adopters)


class PopulationStepTests(unittest.TestCase):
    def test_births_enter_youngest_cohort_by_sex(self) -> None:
        grid = population_step(CohortGrid.zeros(), 100.0, np.zeros(len(COHORTS)))
        self.assertAlmostEqual(grid.male[0], 51.2)
        self.assertAlmostEqual(grid.female[0], 48.8)
        self.assertAlmostEqual(grid.total, 100.0)

    def test_aging_moves_one_fifth_per_year(self) -> None:
        male = np.zeros(len(COHORTS))
        male[0] = 1000.0
        grid = population_step(CohortGrid(male, np.zeros(len(COHORTS))), 0.0, np.zeros(len(COHORTS)))
        self.assertAlmostEqual(grid.male[0], 800.0)
        self.assertAlmostEqual(grid.male[1], 200.0)

    def test_accounting_identity(self) -> None:
        start = CohortGrid(np.full(len(COHORTS), 10.0), np.full(len(COHORTS), 12.0))
        rates = np.linspace(0.001, 0.3, len(COHORTS))
        nxt = population_step(start, 5.0, rates)
        deaths = float((start.male + start.female) @ rates)
        self.assertAlmostEqual(nxt.total - start.total, 5.0 - deaths, places=9)

    def test_overdrawn_cohort_raises(self) -> None:
        start = CohortGrid(np.ones(len(COHORTS)), np.ones(len(COHORTS)))
        with self.assertRaises(NegativePopulation):
            population_step(start, 0.0, np.full(len(COHORTS), 0.9))

    def test_negative_births_rejected(self) -> None:
        with self.assertRaises(DomainError):
            population_step(CohortGrid.zeros(), -1.0, np.zeros(len(COHORTS)))


class EconomyEnergyTests(unittest.TestCase):
    def test_cobb_douglas(self) -> None:
        self.assertAlmostEqual(cobb_douglas_gwp(1.0, 8.0, 1.0, 0.3), 8.0**0.3, places=12)
        self.assertAlmostEqual(cobb_douglas_gwp(1.0, 8.0, 1.0, 0.3), 1.866066, places=6)

    def test_cobb_douglas_domain(self) -> None:
        for args in ((0.0, 1.0, 1.0, 0.3), (1.0, -1.0, 1.0, 0.3), (1.0, 1.0, 1.0, 1.0)):
            with self.subTest(args=args):
                with self.assertRaises(DomainError):
                    cobb_douglas_gwp(*args)

    def test_logit_shares(self) -> None:
        shares = energy_market_shares({"coal": 2.0, "solar": 1.0}, 1.0)
        self.assertAlmostEqual(sum(shares.values()), 1.0, places=12)
        self.assertAlmostEqual(shares["solar"] / shares["coal"], math.e, places=9)
        np.testing.assert_allclose(energy_market_shares([3.0, 5.0, 7.0], 0.0), [1 / 3] * 3)

    def test_logit_domain(self) -> None:
        with self.assertRaises(DomainError):
            energy_market_shares([1.0, 0.0], 1.0)
        with self.assertRaises(DomainError):
            energy_market_shares([1.0, 2.0], -0.1)


class CarbonClimateTests(unittest.TestCase):
    def test_preindustrial_pools_are_steady(self) -> None:
        res = carbon_step(CarbonReservoirs.preindustrial(), 0.0, 0.0)
        np.testing.assert_allclose(res.vector(), CarbonReservoirs.preindustrial().vector(), rtol=1e-12)

    def test_step_matches_exchange_matrix(self) -> None:
        start = CarbonReservoirs.from_vector((851.0, 2350.0, 940.0, 2730.0, 2705.0, 11702.0, 7200.0))
        exchange = CarbonExchange()
        nxt = carbon_step(start, 10.0, 1.0, exchange=exchange)
        source = np.zeros(7)
        source[0] = 9.0
        expected = start.vector() + exchange.matrix() @ start.vector() + source
        np.testing.assert_allclose(nxt.vector(), expected, rtol=1e-12)
        self.assertAlmostEqual(nxt.total - start.total, 9.0, places=9)

    def test_forcing_doubling(self) -> None:
        self.assertAlmostEqual(radiative_forcing(2 * 277.0), 3.71, places=12)
        with self.assertRaises(DomainError):
            radiative_forcing(0.0)

    def test_temperature_equilibrium_is_steady(self) -> None:
        state = ClimateState(400.0, 0.0, 0.0, 2.4, (2.4, 2.4, 2.4, 2.4))
        nxt = temperature_step(state, 3.0)
        self.assertAlmostEqual(nxt.surface, 2.4, places=12)
        for value in nxt.deep:
            self.assertAlmostEqual(value, 2.4, places=12)

    def test_two_box_transient_matches_matrix_exponential(self) -> None:
        params = ClimateParameters(sensitivity=0.8, surface_capacity=8.0, deep_capacity=(100.0,), exchange=(0.7,))
        forcing = 3.7
        lam = 1.0 / params.sensitivity
        c, c0, g = params.surface_capacity, params.deep_capacity[0], params.exchange[0]
        A = np.array([[-(lam + g) / c, g / c], [g / c0, -g / c0]])
        b = np.array([forcing / c, 0.0])
        steady = -np.linalg.solve(A, b)
        horizon = 50.0
        exact = steady + expm(A * horizon) @ (np.zeros(2) - steady)

        errors = []
        for dt in (0.1, 0.05):
            state = ClimateState(400.0, 0.0, 0.0, 0.0, (0.0,))
            for _ in range(int(round(horizon / dt))):
                state = temperature_step(state, forcing, params=params, dt=dt)
            errors.append(abs(state.surface - exact[0]))
        self.assertLess(errors[0], 0.05)
        self.assertAlmostEqual(errors[0] / errors[1], 2.0, delta=0.2)


class DietBiodiversityTests(unittest.TestCase):
    def test_logistic_recurrence(self) -> None:
        state = _diet(0.1)
        a = 0.1
        for _ in range(30):
            state = diet_shift_step(state, 0.3, 0.0)
            a = a + 0.3 * a * (1 - a)
            self.assertAlmostEqual(state.adopters, a, places=12)

    def test_logistic_converges_to_analytic_curve(self) -> None:
        r, a0, horizon = 0.4, 0.05, 10.0
        analytic = 1.0 / (1.0 + (1.0 - a0) / a0 * math.exp(-r * horizon))
        state = _diet(a0)
        dt = 0.001
        for _ in range(int(round(horizon / dt))):
            state = diet_shift_step(state, r, 0.0, dt=dt)
        self.assertAlmostEqual(state.adopters, analytic, delta=1e-3)

    def test_adopter_share_stays_bounded(self) -> None:
        state = diet_shift_step(_diet(0.9), 5.0, 5.0)
        self.assertLessEqual(state.adopters, 1.0)

    def test_msa_relaxation_rates(self) -> None:
        down = msa_step(BiodiversityState(0.8, 0.8), 0.6)
        up = msa_step(BiodiversityState(0.5, 0.5), 0.7)
        self.assertAlmostEqual(down.msa, 0.79, places=12)
        self.assertAlmostEqual(up.msa, 0.504, places=12)
        with self.assertRaises(DomainError):
            msa_step(BiodiversityState(0.5, 0.5), 1.5)


class RegistryTests(unittest.TestCase):
    def test_shipped_registry_loads(self) -> None:
        registry = load_registry()
        self.assertIn("climate.sensitivity", registry)
        self.assertTrue(registry["climate.non_co2_forcing"].is_table)
        for entry in registry.entries.values():
            if entry.nominal is not None:
                with self.subTest(name=entry.name):
                    self.assertTrue(entry.admits(entry.nominal))

    def test_duplicate_entry(self) -> None:
        payload = {"parameters": [{"name": "a.b", "nominal": 1.0}, {"name": "a.b", "nominal": 2.0}]}
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "parameters.json"
            path.write_text(json.dumps(payload), encoding="utf-8")
            with self.assertRaises(DuplicateName):
                load_registry(path)

    def test_nominal_outside_range(self) -> None:
        payload = {"parameters": [{"name": "a.b", "nominal": 5.0, "range": [0.0, 1.0]}]}
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "parameters.json"
            path.write_text(json.dumps(payload), encoding="utf-8")
            with self.assertRaises(ParseError):
                load_registry(path)

    def test_missing_parameter(self) -> None:
        params = load_registry().nominal_set().without("climate.sensitivity")
        with self.assertRaises(MissingParameter):
            assemble_world_model(params)

    def test_missing_table_parameter(self) -> None:
        params = load_registry().nominal_set().without("fertility.table")
        with self.assertRaises(MissingParameter) as ctx:
            assemble_world_model(params)
        self.assertIn("fertility.table", str(ctx.exception))


class CouplingDirectionTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.model = compile_world(load_registry().nominal_set())

    def _at_2100(self, variable: str, **values: float) -> float:
        return run(self.model, TimeGrid(), parameters=values, record=[variable]).at(variable, 2100)

    def _assert_increases(self, variable: str, parameter: str, low: float, high: float) -> None:
        before = self._at_2100(variable, **{parameter: low})
        after = self._at_2100(variable, **{parameter: high})
        self.assertGreater(after, before, f"{variable} should rise with {parameter}")

    def test_higher_fertility_gives_larger_population(self) -> None:
        self._assert_increases("population.total", "fertility.scale", 0.8, 1.2)

    def test_higher_sensitivity_gives_warmer_climate(self) -> None:
        self._assert_increases("climate.temperature", "climate.sensitivity", 0.7, 1.0)

    def test_more_energy_demand_gives_more_atmospheric_carbon(self) -> None:
        self._assert_increases("carbon.atmospheric_ppm", "energy.demand_scale", 0.9, 1.15)

    def test_faster_ocean_uptake_gives_less_atmospheric_carbon(self) -> None:
        fast = self._at_2100("carbon.atmospheric_ppm", **{"carbon.k_atm_ocean": 0.013})
        slow = self._at_2100("carbon.atmospheric_ppm", **{"carbon.k_atm_ocean": 0.009})
        self.assertLess(fast, slow)


class WorldRunTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.traj = run(compile_world(load_registry().nominal_set()), TimeGrid())

    def test_outputs_are_recorded(self) -> None:
        for name in WORLD_OUTPUTS:
            with self.subTest(name=name):
                self.assertIn(name, self.traj)

    def test_land_classes_sum_is_constant(self) -> None:
        total = sum(LAND_2015.values())
        np.testing.assert_allclose(self.traj["land.total"], total, rtol=1e-9)

    def test_carbon_mass_balance(self) -> None:
        total = self.traj["carbon.total"]
        cumulative = self.traj["carbon.cumulative_emissions"]
        np.testing.assert_allclose(total - total[0], cumulative, rtol=1e-9, atol=1e-9 * total[0])

    def test_population_accounting(self) -> None:
        pop = self.traj["population.total"]
        change = np.diff(pop)
        expected = (self.traj["population.births"] - self.traj["population.deaths"])[:-1]
        np.testing.assert_allclose(change, expected, rtol=1e-9, atol=1e-9 * pop[0])

    def test_snapshot_states(self) -> None:
        snap = snapshot_states(self.traj, 2050)
        self.assertAlmostEqual(snap.land.total, sum(LAND_2015.values()), places=9)
        self.assertAlmostEqual(snap.cohorts.total, self.traj.at("population.total", 2050), delta=1e-6 * snap.cohorts.total)
        self.assertAlmostEqual(sum(s.share for s in snap.energy.sources.values()), 1.0, places=9)


if __name__ == "__main__":
    unittest.main()
