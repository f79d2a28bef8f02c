"""Configuration loader module.

Loads numerical defaults from the YAML file under ``config/`` and exposes
environment variables (``.env`` supported) to the command-line and HTTP
layers.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any

import yaml
from dotenv import load_dotenv

from src.utils.errors import ConfigurationError

# Load environment variables from .env file
load_dotenv()

# Default config file path
DEFAULT_CONFIG_PATH = Path(__file__).parent.parent.parent / "config" / "config.yaml"


class Config:
    """Numerical defaults manager.

    Values are read from a YAML file and looked up with dot notation.
    Environment variables are read separately through ``get_env``.

    Args:
        config_path: Path to the YAML configuration file.

    Example:
        >>> config = Config()
        >>> config.get("estimation.window")
        252
        >>> config.get("robust.tuning")
        1.205
    """

    def __init__(self, config_path: Path | str = DEFAULT_CONFIG_PATH) -> None:
        self._config_path = Path(config_path)
        self._data: dict[str, Any] = {}
        self._load()

    def _load(self) -> None:
        """Load configuration from the YAML file."""
        if not self._config_path.exists():
            self._data = {}
            return
        try:
            with open(self._config_path) as f:
                self._data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Cannot parse {self._config_path}: {e}") from e
        if not isinstance(self._data, dict):
            raise ConfigurationError(f"{self._config_path} must hold a mapping at top level")

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value using dot notation.

        Args:
            key: Dot-separated key path (e.g., "pricing.q_floor").
            default: Default value if key is not found.

        Returns:
            The configuration value, or default if not found.
        """
        value: Any = self._data
        for k in key.split("."):
            if isinstance(value, dict):
                value = value.get(k)
            else:
                return default
            if value is None:
                return default
        return value

    @staticmethod
    def get_env(key: str, default: str | None = None) -> str | None:
        """Get an environment variable, or ``default`` when unset."""
        return os.getenv(key, default)

    @staticmethod
    def require_env(key: str) -> str:
        """Get a required environment variable.

        Raises:
            ConfigurationError: If the variable is not set.
        """
        value = os.getenv(key)
        if value is None:
            raise ConfigurationError(f"Required environment variable '{key}' is not set")
        return value

    def reload(self) -> None:
        """Reload configuration from the file."""
        self._load()

    def as_dict(self) -> dict[str, Any]:
        """Return the full configuration as a dictionary."""
        return dict(self._data)
