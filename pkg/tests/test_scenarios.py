from __future__ import annotations

import json
from pathlib import Path
import tempfile
import unittest

from errors import BadLabel, DuplicateName, OutOfRange, ParseError, UnknownParameter
from scenarios import (
    FORCING_PARAMETER,
    PATHWAY_LABELS,
    ParameterRange,
    PathwaySpec,
    apply_pathway,
    candidate_ranges,
    dump_pathway,
    load_pathway,
    load_pathways,
    load_ranges,
    read_forcing_csv,
    resolve_pathway,
)
from sectors import load_registry
from settings import DATA_DIR


def _write(tmp: str, payload, name: str = "pathway.json") -> Path:
    path = Path(tmp) / name
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2)
    path.write_text(text, encoding="utf-8")
    return path


def _pathway(**sections) -> dict:
    payload = {"meta": {"id": "GreenRecovery", "label": "SSP1-2.6"}, "overrides": {}, "uncertainty": []}
    for key, value in sections.items():
        if key == "meta":
            payload["meta"].update(value)
        else:
            payload[key] = value
    return payload


class ShippedPathwayTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.registry = load_registry()
        cls.pathways = load_pathways(registry=cls.registry)

    def test_all_five_pathways_load_with_their_labels(self) -> None:
        self.assertEqual(set(self.pathways), set(PATHWAY_LABELS))
        for pid, spec in self.pathways.items():
            with self.subTest(pathway=pid):
                self.assertEqual(spec.label, PATHWAY_LABELS[pid])
                self.assertEqual(len(spec.uncertainty), 21)
                self.assertIsNotNone(spec.forcing)

    def test_bau_keeps_nominal_values(self) -> None:
        base = self.registry.nominal_set()
        bau = self.pathways["BAU"]
        self.assertEqual(dict(bau.overrides), {})
        self.assertEqual(apply_pathway(base, bau).differences(base), [])

    def test_green_recovery_overrides_and_forcing(self) -> None:
        base = self.registry.nominal_set()
        green = apply_pathway(base, self.pathways["GreenRecovery"])
        self.assertEqual(green["fertility.scale"], 0.85)
        self.assertEqual(green[FORCING_PARAMETER], read_forcing_csv(DATA_DIR / "forcing" / "rcp26.csv"))
        changed = green.differences(base)
        self.assertIn("fertility.scale", changed)
        self.assertIn(FORCING_PARAMETER, changed)
        self.assertNotIn("climate.sensitivity", changed)

    def test_resolve_by_id_or_path(self) -> None:
        by_id = resolve_pathway("FossilFueled", self.registry)
        self.assertEqual(by_id.label, "SSP5-8.5")
        with self.assertRaises(BadLabel):
            load_pathways(registry=self.registry, ids=["Utopia"])

    def test_dump_then_load(self) -> None:
        spec = self.pathways["Inequality"]
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "inequality.json"
            dump_pathway(spec, path)
            again = load_pathway(path, self.registry)
        self.assertEqual(again, spec)


class PathwayValidationTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.registry = load_registry()

    def _load(self, payload) -> PathwaySpec:
        with tempfile.TemporaryDirectory() as tmp:
            return load_pathway(_write(tmp, payload), self.registry)

    def test_malformed_json_names_line(self) -> None:
        with self.assertRaises(ParseError) as ctx:
            self._load('{\n  "meta": {"id": "BAU",\n}\n')
        self.assertEqual(ctx.exception.line, 3)

    def test_labels(self) -> None:
        with self.assertRaises(BadLabel):
            self._load(_pathway(meta={"id": "Utopia"}))
        with self.assertRaises(BadLabel):
            self._load(_pathway(meta={"label": "SSP5-8.5"}))

    def test_unknown_override(self) -> None:
        with self.assertRaises(UnknownParameter):
            self._load(_pathway(overrides={"fertility.scal": 0.9}))

    def test_override_outside_registry_range(self) -> None:
        with self.assertRaises(OutOfRange):
            self._load(_pathway(overrides={"fertility.scale": 2.0}))

    def test_override_outside_pathway_groups(self) -> None:
        with self.assertRaises(OutOfRange):
            self._load(_pathway(overrides={"climate.sensitivity": 0.9}))

    def test_override_must_be_a_number(self) -> None:
        with self.assertRaises(ParseError):
            self._load(_pathway(overrides={"fertility.scale": "high"}))

    def test_range_checks(self) -> None:
        cases = [
            ([{"parameter": "climate.sensitivity", "low": 1.0, "high": 0.7}], OutOfRange),
            ([{"parameter": "climate.sensitivity", "low": 0.1, "high": 0.9}], OutOfRange),
            ([{"parameter": "nope.nothing", "low": 0.1, "high": 0.9}], UnknownParameter),
            (
                [
                    {"parameter": "climate.sensitivity", "low": 0.7, "high": 0.9},
                    {"parameter": "climate.sensitivity", "low": 0.7, "high": 1.0},
                ],
                DuplicateName,
            ),
            ([{"parameter": "climate.sensitivity", "low": 0.7, "high": 0.9, "distribution": "normal"}], ParseError),
        ]
        for ranges, error in cases:
            with self.subTest(error=error.__name__):
                with self.assertRaises(error):
                    self._load(_pathway(uncertainty=ranges))

    def test_candidate_ranges_fall_back_to_registry(self) -> None:
        spec = self._load(_pathway(overrides={"fertility.scale": 0.9}))
        names = [rg.parameter for rg in candidate_ranges(self.registry, spec)]
        self.assertIn("climate.sensitivity", names)
        self.assertNotIn("fertility.scale", names)

    def test_range_file(self) -> None:
        ranges = [{"parameter": "climate.sensitivity", "low": 0.7, "high": 0.9}]
        with tempfile.TemporaryDirectory() as tmp:
            from_list = load_ranges(_write(tmp, ranges, "list.json"), self.registry)
            from_object = load_ranges(_write(tmp, {"uncertainty": ranges}, "object.json"), self.registry)
            with self.assertRaises(ParseError):
                load_ranges(_write(tmp, [], "empty.json"), self.registry)
        self.assertEqual(from_list, (ParameterRange("climate.sensitivity", 0.7, 0.9),))
        self.assertEqual(from_list, from_object)


class ParameterRangeTests(unittest.TestCase):
    def test_scale(self) -> None:
        rg = ParameterRange("x", 2.0, 6.0)
        self.assertEqual(rg.width, 4.0)
        self.assertEqual(rg.scale(0.25), 3.0)


if __name__ == "__main__":
    unittest.main()
