"""Run configuration for the ``gjr`` command.

Values come from three layers, later ones winning: the YAML defaults under
``config/``, an optional run-config file (JSON or flat ``key=value``), and
command-line flags.
"""

from __future__ import annotations

import hashlib
import json
import logging
from datetime import date
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.utils.config import Config
from src.utils.errors import ConfigurationError

logger = logging.getLogger(__name__)

Command = Literal["simulate", "estimate", "price", "calibrate", "fit-driver"]
OUTPUT_DIR_ENV = "GJR_OUTPUT_DIR"


class RunConfig(BaseModel):
    """Validated settings of one ``gjr`` invocation."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    command: Command

    # inputs
    prices: Path | None = None
    chain: Path | None = None
    factors: Path | None = None
    start: date | None = None
    end: date | None = None
    estimation_end: date | None = None
    percent_factors: bool = True
    rf_fallback: float | None = None

    # time grid and estimation
    dt: float = Field(default=1.0 / 252, gt=0)
    window: int = Field(default=252, ge=30)
    smoothing: int = Field(default=252, ge=1)
    sweep: list[int] = Field(default_factory=list)
    significance: float = Field(default=0.05, gt=0, lt=1)
    bias_correction: bool = False
    robust_tuning: float = Field(default=1.205, gt=0)
    robust_maxiter: int = Field(default=50, ge=1)
    robust_tol: float = Field(default=1e-8, gt=0)

    # model
    mu: float = 0.0
    sigma: float = Field(default=0.2, gt=0)
    beta: float = 0.0
    s0: float = Field(default=100.0, gt=0)
    n: int = Field(default=252, ge=1)
    rf: float = Field(default=0.0, ge=0)
    lambda0: float = Field(default=0.0, ge=0)
    lambda1: float = 0.0
    htc: bool = False
    mode: Literal["exact", "leading_order"] = "exact"
    q_floor: float = Field(default=1e-12, gt=0, lt=0.5)
    max_clamp_fraction: float = Field(default=0.1, ge=0, le=1)

    # claims
    strike: float | None = Field(default=None, gt=0)
    kind: Literal["call", "put"] = "call"

    # path-dependent tree
    path_dependent: bool = False
    gamma: float = 0.0
    kappa: float = Field(default=6.0, gt=0)
    h_id: str = "student_t"
    v: float | None = None
    method: Literal["enumerate", "monte_carlo"] = "enumerate"
    mc_paths: int = Field(default=100_000, ge=1_000)

    # simulation and drivers
    paths: int = Field(default=30, ge=1)
    ensemble_size: int = Field(default=100_000, ge=1)
    driver: Literal["endogenous", "exogenous", "higher_moment"] = "endogenous"
    joint: bool = False
    seed: int = Field(default=0, ge=0)
    block_size: int = Field(default=1024, ge=1)
    kappa_bounds: tuple[float, float] = (5.0, 30.0)
    hm_starts: int = Field(default=8, ge=1)
    nm_maxiter: int = Field(default=500, ge=1)
    nm_fatol: float = Field(default=1e-10, gt=0)

    # calibration
    target: Literal["mu", "beta", "sigma", "lambda0", "lambda1", "pd_sigma", "bs_sigma"] = "sigma"
    fit_htc: bool = False
    grid_points: int = Field(default=64, ge=4)
    xtol: float = Field(default=1e-8, gt=0)
    pd_enumerate_max_steps: int = Field(default=16, ge=1, le=24)
    htc_starts: list[float] = Field(default_factory=lambda: [1e-8, 1e-3, 0.1, 1.0, 10.0, 100.0], min_length=1)

    output_dir: Path = Path("./output")
    log_level: str | None = None

    @field_validator("prices", "chain", "factors")
    @classmethod
    def _file_exists(cls, value: Path | None) -> Path | None:
        if value is not None and not value.is_file():
            raise ValueError(f"file not found: {value}")
        return value

    @model_validator(mode="after")
    def _consistent(self) -> RunConfig:
        if self.start and self.end and self.start >= self.end:
            raise ValueError(f"start {self.start} must precede end {self.end}")
        if self.estimation_end and not (
            (self.start is None or self.start < self.estimation_end)
            and (self.end is None or self.estimation_end < self.end)
        ):
            raise ValueError(f"estimation_end {self.estimation_end} must fall strictly inside [start, end]")
        if not 0 < self.kappa_bounds[0] < self.kappa_bounds[1]:
            raise ValueError(f"kappa_bounds must be increasing and positive, got {self.kappa_bounds}")
        if any(not x > 0 for x in self.htc_starts):
            raise ValueError("htc_starts must be positive")
        if self.htc and self.lambda0 <= 0:
            raise ValueError("htc requires lambda0 > 0")
        needs = {
            "estimate": ("prices",),
            "calibrate": ("chain",),
            "fit-driver": ("prices",),
        }.get(self.command, ())
        missing = [name for name in needs if getattr(self, name) is None]
        if self.command == "fit-driver" and self.driver == "exogenous" and self.factors is None:
            missing.append("factors")
        if missing:
            raise ValueError(f"'{self.command}' requires: {', '.join(missing)}")
        return self

    def config_hash(self) -> str:
        """First 16 hex digits of the SHA-256 of the canonical settings (output location excluded)."""
        payload = self.model_dump(mode="json", exclude={"output_dir", "log_level"})
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_sources(
        cls,
        command: str,
        config_file: str | Path | None = None,
        overrides: dict[str, Any] | None = None,
        defaults: Config | None = None,
    ) -> RunConfig:
        """Merge YAML defaults, the run-config file and CLI overrides.

        Raises:
            ConfigurationError: If the file cannot be read or validation fails.
        """
        values = _yaml_defaults(defaults or Config())
        env_dir = Config.get_env(OUTPUT_DIR_ENV)
        if env_dir:
            values["output_dir"] = env_dir
        if config_file is not None:
            values.update(read_run_file(config_file))
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        values["command"] = command
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigurationError(f"invalid run configuration: {e}") from e


# RunConfig field <- dotted key in config/config.yaml
YAML_FIELDS = {
    "dt": "tree.dt",
    "window": "estimation.window",
    "smoothing": "estimation.smoothing",
    "significance": "estimation.significance",
    "bias_correction": "estimation.bias_correction",
    "robust_tuning": "robust.tuning",
    "robust_maxiter": "robust.maxiter",
    "robust_tol": "robust.tol",
    "mode": "pricing.mode",
    "q_floor": "pricing.q_floor",
    "max_clamp_fraction": "pricing.max_clamp_fraction",
    "mc_paths": "pricing.mc_paths",
    "ensemble_size": "driver.ensemble_size",
    "block_size": "driver.block_size",
    "kappa_bounds": "driver.kappa_bounds",
    "hm_starts": "driver.starts",
    "nm_maxiter": "driver.nm_maxiter",
    "nm_fatol": "driver.nm_fatol",
    "grid_points": "calibration.grid_points",
    "xtol": "calibration.xtol",
    "pd_enumerate_max_steps": "calibration.pd_enumerate_max_steps",
    "htc_starts": "calibration.htc_starts",
    "percent_factors": "output.percent_factors",
    "output_dir": "output.directory",
}


def _yaml_defaults(config: Config) -> dict[str, Any]:
    return {field: config.get(key) for field, key in YAML_FIELDS.items() if config.get(key) is not None}


def read_run_file(path: str | Path) -> dict[str, Any]:
    """Parse a JSON document or flat ``key=value`` lines (``#`` starts a comment)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    text = path.read_text()
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"cannot parse {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path} must hold a JSON object")
        return data

    values: dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"{path}:{number}: expected key=value, got {raw!r}")
        values[key.strip().replace("-", "_")] = _coerce(value.strip())
    return values


def _coerce(text: str) -> Any:
    """JSON literal when it parses (numbers, booleans, lists), else the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text
