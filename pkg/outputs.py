"""
outputs.py - staged output directories and run manifests.

Every subcommand writes into a staging directory next to the requested output directory and
moves the finished files into place only after all of them were written, so a failing run
leaves no partial files behind.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
import hashlib
from importlib import metadata
import json
import logging
import os
from pathlib import Path
import platform
import shutil
import tempfile
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from settings import TOOL_VERSION


logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def input_digests(paths: Sequence[Union[str, Path]]) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for p in paths:
        path = Path(p)
        if path.is_dir():
            for child in sorted(path.rglob("*")):
                if child.is_file():
                    out[str(child)] = sha256_file(child)
        elif path.is_file():
            out[str(path)] = sha256_file(path)
    return out


def library_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version(), "numpy": np.__version__, "pandas": pd.__version__}
    for package in ("scipy", "SALib", "joblib", "networkx", "matplotlib", "reportlab"):
        try:
            versions[package] = metadata.version(package)
        except metadata.PackageNotFoundError:
            continue
    return versions


@dataclass
class RunManifest:
    subcommand: str
    inputs: Dict[str, str] = field(default_factory=dict)
    seed: Optional[int] = None
    n: Optional[int] = None
    workers: Optional[int] = None
    tool_version: str = TOOL_VERSION
    wall_clock_s: float = 0.0
    outputs: List[str] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    versions: Dict[str, str] = field(default_factory=library_versions)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "RunManifest":
        known = {k: d[k] for k in RunManifest.__dataclass_fields__ if k in d}
        return RunManifest(**known)


def read_manifest(directory: Union[str, Path]) -> RunManifest:
    path = Path(directory) / MANIFEST_NAME
    payload = json.loads(path.read_text(encoding="utf-8"))
    return RunManifest.from_dict(payload)


class StagedOutput:
    """Collects files in a temporary sibling directory of `target`."""

    def __init__(self, target: Union[str, Path]) -> None:
        self.target = Path(target)
        self.target.parent.mkdir(parents=True, exist_ok=True)
        self.staging = Path(tempfile.mkdtemp(prefix=f".{self.target.name}.", dir=self.target.parent))
        self.files: List[str] = []

    def path(self, name: str) -> Path:
        p = self.staging / name
        p.parent.mkdir(parents=True, exist_ok=True)
        if name not in self.files:
            self.files.append(name)
        return p

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        with open(p, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        return p

    def write_json(self, name: str, payload: Any) -> Path:
        return self.write_text(name, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        p = self.path(name)
        frame.to_csv(p, index=False, lineterminator="\n", encoding="utf-8")
        return p

    def commit(self, manifest: Optional[RunManifest] = None) -> List[Path]:
        if manifest is not None:
            manifest.outputs = sorted(set(self.files) | {MANIFEST_NAME})
            self.write_json(MANIFEST_NAME, manifest.to_dict())
        self.target.mkdir(parents=True, exist_ok=True)
        moved: List[Path] = []
        for name in self.files:
            dest = self.target / name
            dest.parent.mkdir(parents=True, exist_ok=True)
            os.replace(self.staging / name, dest)
            moved.append(dest)
        shutil.rmtree(self.staging, ignore_errors=True)
        logger.info("Wrote %d file(s) to %s", len(moved), self.target)
        return moved

    def discard(self) -> None:
        shutil.rmtree(self.staging, ignore_errors=True)


@contextmanager
def staged_output(target: Union[str, Path]) -> Iterator[StagedOutput]:
    stage = StagedOutput(target)
    try:
        yield stage
    finally:
        stage.discard()
