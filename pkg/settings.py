"""
settings.py - environment-driven runtime settings.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional


BASE_DIR = Path(__file__).resolve().parent
DATA_DIR = BASE_DIR / "data"
PATHWAYS_DIR = BASE_DIR / "pathways"
REGISTRY_JSON = DATA_DIR / "parameters.json"
INDICATORS_JSON = DATA_DIR / "indicators.json"
TARGETS_JSON = DATA_DIR / "targets.json"

TOOL_VERSION = "0.4.0"
DEFAULT_CHUNK_SIZE = 128


def env(name: str, default: Optional[str] = None) -> Optional[str]:
    value = os.environ.get(name)
    if value is not None and str(value).strip():
        return str(value).strip()
    return default


def _env_int(name: str, default: int, *, minimum: int = 1) -> int:
    raw = env(name)
    if raw is None:
        return default
    try:
        parsed = int(raw)
    except ValueError:
        return default
    return parsed if parsed >= minimum else default


def default_workers() -> int:
    return _env_int("WORLDPATH_WORKERS", 1)


def chunk_size() -> int:
    return _env_int("WORLDPATH_CHUNK_SIZE", DEFAULT_CHUNK_SIZE)


def log_level() -> str:
    return (env("WORLDPATH_LOG_LEVEL", "INFO") or "INFO").upper()
