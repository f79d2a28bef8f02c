"""Output artifacts: CSV tables and JSON summaries stamped with run metadata."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, is_dataclass
from datetime import date
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import scipy
import statsmodels

import src
from src.cli.config import RunConfig

logger = logging.getLogger(__name__)


def run_metadata(config: RunConfig) -> dict[str, Any]:
    """Config hash, seed and the versions of the numerical stack."""
    return {
        "command": config.command,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "versions": {
            "gjr-pricing": src.__version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pandas": pd.__version__,
            "statsmodels": statsmodels.__version__,
        },
    }


def header_line(config: RunConfig) -> str:
    meta = run_metadata(config)
    versions = " ".join(f"{name}={version}" for name, version in meta["versions"].items())
    return f"# command={meta['command']} config_hash={meta['config_hash']} seed={meta['seed']} {versions}"


def write_csv(frame: pd.DataFrame, name: str, config: RunConfig) -> Path:
    """Write ``frame`` to ``output_dir/name`` under a ``#`` metadata header."""
    path = Path(config.output_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(header_line(config) + "\n")
        frame.to_csv(f, index=False, float_format="%.17g", lineterminator="\n")
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path


def _jsonable(value: Any) -> Any:
    if is_dataclass(value) and not isinstance(value, type):
        return _jsonable(asdict(value))
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, (date, np.datetime64, Path)):
        return str(value)
    return value


def write_json(payload: dict[str, Any], name: str, config: RunConfig) -> Path:
    """Write ``payload`` with a ``meta`` block; keys are sorted so reruns are byte-identical."""
    path = Path(config.output_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"meta": run_metadata(config), **_jsonable(payload)}
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
    logger.info("Wrote %s", path)
    return path
