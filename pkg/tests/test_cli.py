from __future__ import annotations

from contextlib import redirect_stderr, redirect_stdout
import io
import json
from pathlib import Path
import tempfile
import unittest
from unittest.mock import patch

import numpy as np
import pandas as pd

import cli
from errors import NonFiniteValue, ParseError


def _main(argv) -> int:
    with redirect_stdout(io.StringIO()), redirect_stderr(io.StringIO()):
        return cli.main(["--log-level", "WARNING", *argv])


class ParserTests(unittest.TestCase):
    def test_help_exits_cleanly(self) -> None:
        out = io.StringIO()
        with redirect_stdout(out), self.assertRaises(SystemExit) as ctx:
            cli.main(["--help"])
        self.assertEqual(ctx.exception.code, 0)
        for command in ("simulate", "screen", "ensemble", "score", "delta"):
            self.assertIn(command, out.getvalue())

    def test_missing_pathway_is_usage_error(self) -> None:
        with redirect_stderr(io.StringIO()), self.assertRaises(SystemExit) as ctx:
            cli.main(["simulate", "--out", "unused"])
        self.assertEqual(ctx.exception.code, 2)

    def test_bad_year_list_is_usage_error(self) -> None:
        with redirect_stderr(io.StringIO()), self.assertRaises(SystemExit) as ctx:
            cli.main(["delta", "--ref", "a", "--alt", "b", "--years", "2030,soon", "--out", "unused"])
        self.assertEqual(ctx.exception.code, 2)

    def test_workers_default_comes_from_environment(self) -> None:
        with patch.dict("os.environ", {"WORLDPATH_WORKERS": "3"}):
            args = cli.build_parser().parse_args(["ensemble", "--pathway", "BAU", "--out", "x"])
        self.assertEqual(args.workers, 3)
        self.assertEqual(args.n, 10_000)
        with patch.dict("os.environ", {"WORLDPATH_WORKERS": "zero"}):
            args = cli.build_parser().parse_args(["ensemble", "--pathway", "BAU", "--out", "x"])
        self.assertEqual(args.workers, 1)

    def test_score_defaults(self) -> None:
        args = cli.build_parser().parse_args(["score", "--ensemble", "a", "--out", "x"])
        self.assertEqual(args.ambition, "moderate")
        self.assertEqual(args.milestone, 2030)


class ExitCodeTests(unittest.TestCase):
    def test_input_errors_exit_2(self) -> None:
        with patch("cli.cmd_simulate", side_effect=ParseError("broken", path="x.json", line=4)):
            self.assertEqual(_main(["simulate", "--pathway", "BAU", "--out", "unused"]), 2)

    def test_numeric_errors_exit_3(self) -> None:
        with patch("cli.cmd_simulate", side_effect=NonFiniteValue("climate.temperature", 2061.0)):
            self.assertEqual(_main(["simulate", "--pathway", "BAU", "--out", "unused"]), 3)

    def test_malformed_pathway_leaves_no_output(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            pathway = Path(tmp) / "broken.json"
            pathway.write_text('{"meta": {"id": "BAU", "label": "SSP2-4.5"},\n', encoding="utf-8")
            out = Path(tmp) / "run"
            self.assertEqual(_main(["simulate", "--pathway", str(pathway), "--out", str(out)]), 2)
            self.assertFalse(out.exists())

    def test_unknown_pathway_id(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "run"
            self.assertEqual(_main(["simulate", "--pathway", "Utopia", "--out", str(out)]), 2)
            self.assertFalse(out.exists())


class SimulateTests(unittest.TestCase):
    def test_simulate_writes_trajectory_and_manifest(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "bau"
            self.assertEqual(_main(["simulate", "--pathway", "BAU", "--out", str(out)]), 0)
            trajectory = pd.read_csv(out / "trajectory.csv")
            controls = pd.read_csv(out / "controls.csv")
            manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(len(trajectory), 86)
        self.assertEqual(trajectory.columns[0], "year")
        self.assertIn("climate.temperature", controls.columns)
        self.assertEqual(manifest["subcommand"], "simulate")
        self.assertIn("trajectory.csv", manifest["outputs"])
        self.assertTrue(any(name.endswith("bau.json") for name in manifest["inputs"]))


class EnsembleWorkflowTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls._tmp = tempfile.TemporaryDirectory()
        cls.root = Path(cls._tmp.name)
        cls.bau = cls.root / "bau"
        code = _main(["ensemble", "--pathway", "BAU", "--no-screen", "--n", "6", "--seed", "4", "--out", str(cls.bau)])
        if code != 0:
            raise AssertionError(f"ensemble exited with {code}")

    @classmethod
    def tearDownClass(cls) -> None:
        cls._tmp.cleanup()

    def test_ensemble_outputs(self) -> None:
        for name in ("envelope.csv", "indicators.csv", "samples.csv", "manifest.json"):
            with self.subTest(name=name):
                self.assertTrue((self.bau / name).is_file())
        manifest = json.loads((self.bau / "manifest.json").read_text(encoding="utf-8"))
        self.assertEqual(manifest["n"], 6)
        self.assertEqual(manifest["seed"], 4)
        self.assertFalse(manifest["details"]["screened"])

    def test_score(self) -> None:
        out = self.root / "score"
        self.assertEqual(_main(["score", "--ensemble", str(self.bau), "--out", str(out)]), 0)
        progress = pd.read_csv(out / "progress.csv")
        self.assertEqual(len(progress), 20)
        self.assertEqual(set(progress["ambition"]), {"moderate"})
        self.assertTrue((out / "goals.csv").is_file())
        self.assertTrue((out / "level_shares.csv").is_file())

    def test_score_rejects_non_milestone_year(self) -> None:
        out = self.root / "score_2040"
        self.assertEqual(_main(["score", "--ensemble", str(self.bau), "--milestone", "2040", "--out", str(out)]), 2)
        self.assertFalse(out.exists())

    def test_delta_against_itself_has_zero_mean_and_symmetric_band(self) -> None:
        out = self.root / "delta"
        argv = ["delta", "--ref", str(self.bau), "--alt", str(self.bau), "--vars", "population.total,carbon.atmospheric_ppm"]
        self.assertEqual(_main([*argv, "--out", str(out)]), 0)
        deltas = pd.read_csv(out / "systems_change.csv")
        self.assertEqual(len(deltas), 6)
        self.assertTrue((deltas["mean_pct"] == 0.0).all())
        self.assertTrue((deltas["lo_pct"] <= 0.0).all())
        self.assertTrue((deltas["hi_pct"] >= 0.0).all())
        np.testing.assert_allclose(deltas["lo_pct"], -deltas["hi_pct"], atol=1e-12)

    def test_delta_missing_directory(self) -> None:
        out = self.root / "delta_missing"
        self.assertEqual(_main(["delta", "--ref", str(self.bau), "--alt", str(self.root / "nope"), "--out", str(out)]), 2)


if __name__ == "__main__":
    unittest.main()
