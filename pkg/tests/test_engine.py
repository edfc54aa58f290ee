from __future__ import annotations

import json
import math
from pathlib import Path
import tempfile
import unittest

import numpy as np

from engine import (
    Auxiliary,
    Flow,
    ModelDefinition,
    Parameter,
    Stock,
    Table,
    TimeGrid,
    compile_model,
    definition_from_dict,
    load_model_definition,
    lookup_eval,
    read_trajectory_csv,
    run,
    run_batch,
    step,
    write_trajectory_csv,
)
from errors import (
    AlgebraicLoop,
    DuplicateName,
    InvalidExpression,
    InvalidGrid,
    InvalidTable,
    NonFiniteValue,
    ParseError,
    UnknownReference,
)


def _growth(rate: float = 0.05, initial: float = 100.0) -> ModelDefinition:
    return ModelDefinition(
        stocks=[Stock("N", initial)],
        flows=[Flow("growth", "k * N", sink="N")],
        parameters=[Parameter("k", rate)],
    )


def _decay(rate: float = 0.1) -> ModelDefinition:
    return ModelDefinition(
        stocks=[Stock("N", 100.0)],
        flows=[Flow("loss", "k * N", source="N")],
        parameters=[Parameter("k", rate)],
    )


class StepTests(unittest.TestCase):
    def test_single_euler_step(self) -> None:
        model = compile_model(_growth())
        self.assertAlmostEqual(step(model, {"N": 100.0}, 0.0)["N"], 105.0, places=12)

    def test_transfer_between_stocks_conserves_total(self) -> None:
        definition = ModelDefinition(
            stocks=[Stock("A", 10.0), Stock("B", 0.0)],
            flows=[Flow("transfer", "2", source="A", sink="B")],
        )
        nxt = step(compile_model(definition), {"A": 10.0, "B": 0.0}, 0.0)
        self.assertEqual(nxt, {"A": 8.0, "B": 2.0})

    def test_zero_flows_leave_state_unchanged(self) -> None:
        model = compile_model(_growth(rate=0.0))
        self.assertEqual(step(model, {"N": 100.0}, 0.0), {"N": 100.0})

    def test_step_requires_every_stock(self) -> None:
        model = compile_model(_growth())
        with self.assertRaises(UnknownReference):
            step(model, {}, 0.0)

    def test_step_parameter_override(self) -> None:
        model = compile_model(_growth())
        self.assertAlmostEqual(step(model, {"N": 100.0}, 0.0, parameters={"k": 0.1})["N"], 110.0, places=12)


class RunTests(unittest.TestCase):
    def test_decay_matches_recurrence(self) -> None:
        traj = run(compile_model(_decay()), TimeGrid(0, 10, 1))
        self.assertAlmostEqual(traj.at("N", 10), 100.0 * 0.9**10, places=9)
        self.assertAlmostEqual(traj.at("N", 10), 34.867844, places=6)

    def test_error_halves_with_step(self) -> None:
        exact = 100.0 * math.exp(-1.0)
        coarse = run(compile_model(_decay()), TimeGrid(0, 10, 1)).at("N", 10)
        fine = run(compile_model(_decay()), TimeGrid(0, 10, 0.5)).at("N", 10)
        ratio = abs(coarse - exact) / abs(fine - exact)
        self.assertGreater(ratio, 1.8)
        self.assertLess(ratio, 2.2)

    def test_flows_and_auxiliaries_are_recorded(self) -> None:
        definition = ModelDefinition(
            stocks=[Stock("N", "2 * k0")],
            auxiliaries=[Auxiliary("doubled", "2 * N"), Auxiliary("peak", "max(1, 2, time)")],
            flows=[Flow("growth", "0.5 * doubled", sink="N")],
            parameters=[Parameter("k0", 5.0)],
        )
        traj = run(compile_model(definition), TimeGrid(0, 3, 1))
        self.assertEqual(traj.at("N", 0), 10.0)
        self.assertEqual(traj.at("doubled", 0), 20.0)
        self.assertEqual(traj.at("growth", 0), 10.0)
        self.assertEqual(traj.at("N", 1), 20.0)
        self.assertEqual(traj.at("peak", 0), 2.0)
        self.assertEqual(traj.at("peak", 3), 3.0)

    def test_table_and_conditional_functions(self) -> None:
        definition = ModelDefinition(
            stocks=[Stock("S", 0.0)],
            auxiliaries=[
                Auxiliary("ramp", "effect(time)"),
                Auxiliary("switch", "if_then_else(time >= 2, 1, 0)"),
                Auxiliary("bounded", "clip(time, 1, 2)"),
            ],
            flows=[Flow("fill", "ramp", sink="S")],
            tables=[Table("effect", ((0, 0), (4, 8)))],
        )
        traj = run(compile_model(definition), TimeGrid(0, 4, 1))
        np.testing.assert_allclose(traj["ramp"], [0, 2, 4, 6, 8])
        np.testing.assert_allclose(traj["switch"], [0, 0, 1, 1, 1])
        np.testing.assert_allclose(traj["bounded"], [1, 1, 2, 2, 2])
        np.testing.assert_allclose(traj["S"], [0, 0, 2, 6, 12])

    def test_non_finite_value_names_variable_and_year(self) -> None:
        definition = ModelDefinition(
            stocks=[Stock("S", 1.0)],
            auxiliaries=[Auxiliary("spike", "1 / (time - 3)")],
            flows=[Flow("inflow", "spike", sink="S")],
        )
        with self.assertRaises(NonFiniteValue) as ctx:
            run(compile_model(definition), TimeGrid(0, 5, 1))
        self.assertEqual(ctx.exception.variable, "spike")
        self.assertEqual(ctx.exception.year, 3.0)

    def test_batch_columns_match_single_runs(self) -> None:
        model = compile_model(_decay())
        grid = TimeGrid(0, 20, 1)
        batch = run_batch(model, grid, overrides={"k": np.array([0.05, 0.1, 0.2])})
        for column, k in enumerate((0.05, 0.1, 0.2)):
            with self.subTest(k=k):
                single = run(model, grid, parameters={"k": k})
                np.testing.assert_array_equal(batch.values["N"][:, column], single["N"])

    def test_declaration_order_does_not_change_results(self) -> None:
        stocks = [Stock("prey", 40.0), Stock("predators", 9.0), Stock("eaten", 0.0)]
        auxiliaries = [
            Auxiliary("encounters", "contact * prey * predators"),
            Auxiliary("hunger", "1 - clip(encounters / predators, 0, 1)"),
            Auxiliary("food_effect", "satiety(encounters / predators)"),
        ]
        flows = [
            Flow("births", "r * prey", sink="prey"),
            Flow("predation", "encounters", source="prey", sink="eaten"),
            Flow("recruitment", "0.1 * encounters * food_effect", sink="predators"),
            Flow("starvation", "m * predators * hunger", source="predators"),
        ]
        parameters = [Parameter("r", 0.4), Parameter("contact", 0.01), Parameter("m", 0.3)]
        tables = [Table("satiety", ((0.0, 0.0), (1.0, 1.0), (3.0, 1.5)))]
        grid = TimeGrid(0, 30, 0.25)
        forward = run(compile_model(ModelDefinition(stocks, auxiliaries, flows, parameters, tables)), grid)
        shuffled = ModelDefinition(
            [stocks[2], stocks[0], stocks[1]],
            auxiliaries[::-1],
            [flows[3], flows[1], flows[0], flows[2]],
            parameters[::-1],
            tables,
        )
        backward = run(compile_model(shuffled), grid)
        for name in ("prey", "predators", "eaten", "encounters", "food_effect", "starvation"):
            with self.subTest(name=name):
                np.testing.assert_array_equal(backward[name], forward[name])

    def test_unknown_override_is_rejected(self) -> None:
        with self.assertRaises(UnknownReference):
            run_batch(compile_model(_decay()), TimeGrid(0, 2, 1), overrides={"q": 1.0})


class CompileTests(unittest.TestCase):
    def test_algebraic_loop(self) -> None:
        definition = ModelDefinition(auxiliaries=[Auxiliary("a", "b + 1"), Auxiliary("b", "2 * a")])
        with self.assertRaises(AlgebraicLoop) as ctx:
            compile_model(definition)
        self.assertIn("a", str(ctx.exception))

    def test_loop_through_stock_is_allowed(self) -> None:
        compile_model(_decay())

    def test_duplicate_names(self) -> None:
        definition = ModelDefinition(stocks=[Stock("x", 0.0)], parameters=[Parameter("x", 1.0)])
        with self.assertRaises(DuplicateName):
            compile_model(definition)

    def test_unknown_reference(self) -> None:
        definition = ModelDefinition(auxiliaries=[Auxiliary("a", "missing.name * 2")])
        with self.assertRaises(UnknownReference):
            compile_model(definition)

    def test_unsupported_syntax(self) -> None:
        for text in ("1 if time else 2", "lambda: 1", "[1, 2]", "'text'", "exp(1, 2)"):
            with self.subTest(text=text):
                with self.assertRaises(InvalidExpression):
                    compile_model(ModelDefinition(auxiliaries=[Auxiliary("a", text)]))

    def test_stock_initial_may_not_reference_auxiliaries(self) -> None:
        definition = ModelDefinition(stocks=[Stock("S", "a")], auxiliaries=[Auxiliary("a", "1")])
        with self.assertRaises(UnknownReference):
            compile_model(definition)


class TableTests(unittest.TestCase):
    def test_lookup_interpolates_and_clamps(self) -> None:
        knots = ((0.0, 0.0), (10.0, 100.0), (20.0, 120.0))
        self.assertEqual(lookup_eval(knots, 5.0), 50.0)
        self.assertEqual(lookup_eval(knots, 15.0), 110.0)
        self.assertEqual(lookup_eval(knots, -3.0), 0.0)
        self.assertEqual(lookup_eval(knots, 99.0), 120.0)

    def test_invalid_tables(self) -> None:
        for knots in (((0, 1),), ((0, 1), (0, 2)), ((1, 1), (0, 2)), ((0, 1), (1, float("nan")))):
            with self.subTest(knots=knots):
                with self.assertRaises(InvalidTable):
                    Table("t", knots)


class GridTests(unittest.TestCase):
    def test_default_grid(self) -> None:
        grid = TimeGrid()
        self.assertEqual(grid.count, 86)
        self.assertEqual(grid.index_of(2100), 85)

    def test_invalid_grids(self) -> None:
        for args in ((2100, 2015, 1), (2015, 2100, 0), (2015, 2100, 0.7)):
            with self.subTest(args=args):
                with self.assertRaises(InvalidGrid):
                    TimeGrid(*args)


class FileTests(unittest.TestCase):
    def test_trajectory_csv(self) -> None:
        traj = run(compile_model(_growth(0.01)))
        with tempfile.TemporaryDirectory() as tmp:
            path = write_trajectory_csv(traj, Path(tmp) / "trajectory.csv")
            lines = path.read_text(encoding="utf-8").splitlines()
            self.assertTrue(lines[0].startswith("year,"))
            self.assertEqual(len(lines), 1 + 86)
            again = read_trajectory_csv(path)
            np.testing.assert_array_equal(again["N"], traj["N"])

    def test_model_definition_file(self) -> None:
        payload = {
            "name": "decay",
            "stocks": [{"name": "N", "initial": 100}],
            "flows": [{"name": "loss", "rate": "k * N", "source": "N", "sink": None}],
            "parameters": [{"name": "k", "value": 0.1}],
        }
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "model.json"
            path.write_text(json.dumps(payload), encoding="utf-8")
            traj = run(compile_model(load_model_definition(path)), TimeGrid(0, 1, 1))
        self.assertAlmostEqual(traj.at("N", 1), 90.0)

    def test_malformed_definition_reports_line(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "model.json"
            path.write_text('{\n  "stocks": [\n    {"name": "N",,}\n  ]\n}\n', encoding="utf-8")
            with self.assertRaises(ParseError) as ctx:
                load_model_definition(path)
        self.assertEqual(ctx.exception.line, 3)

    def test_entries_need_names(self) -> None:
        with self.assertRaises(ParseError):
            definition_from_dict({"stocks": [{"initial": 1}]})


if __name__ == "__main__":
    unittest.main()
