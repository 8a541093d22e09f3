"""
Singleton SettingsLoader: numerical tolerances, resource caps and output
locations, read from [tool.dercoopt] in pyproject.toml and DER_COOPT_* variables
"""

import os
import toml
from typing import Any, Callable, Dict, Tuple
from dercoopt_hub.core.exceptions import ConfigError


DEFAULTS: Dict[str, Any] = {
    "log_dir": "logs",
    "log_format": "string",  # or "json"
    "log_level": "INFO",
    "results_dir": "results",
    "jobs": os.cpu_count() or 1,
    "dp_state_cap": 50_000_000,
    "water_fill_tol": 1e-10,
    "water_fill_max_iter": 200,
    "soc_tol": 1e-9,
    "solver_tol": 1e-9,
    "net_zero_tol": 1e-9,
}

# environment variable -> (setting, parser)
ENV_OVERRIDES: Dict[str, Tuple[str, Callable[[str], Any]]] = {
    "DER_COOPT_LOG": ("log_level", str),
    "DER_COOPT_LOG_FORMAT": ("log_format", str),
    "DER_COOPT_RESULTS_DIR": ("results_dir", str),
    "DER_COOPT_JOBS": ("jobs", int),
    "DER_COOPT_DP_STATE_CAP": ("dp_state_cap", int),
}

_POSITIVE = ("jobs", "dp_state_cap", "water_fill_tol", "water_fill_max_iter", "soc_tol",
             "solver_tol", "net_zero_tol")


class SettingsLoader:
    """Singleton class for configuration management"""

    _instance = None
    _initialized = False

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(SettingsLoader, cls).__new__(cls)
        return cls._instance

    def __init__(self):
        if not self._initialized:
            self._config: Dict[str, Any] = {}
            self._load_config()
            self._initialized = True

    def _load_config(self, pyproject: str = "pyproject.toml"):
        """Defaults, then [tool.dercoopt], then the environment"""
        self._config = dict(DEFAULTS)

        try:
            with open(pyproject, "r", encoding="utf-8") as f:
                tool_config = toml.load(f).get("tool", {}).get("dercoopt", {})
            self._config.update(tool_config)
        except (FileNotFoundError, toml.TomlDecodeError):
            pass  # Use defaults

        for variable, (key, parse) in ENV_OVERRIDES.items():
            raw = os.getenv(variable)
            if raw is None:
                continue
            try:
                self._config[key] = parse(raw)
            except ValueError:
                raise ConfigError(f"{variable}={raw!r} is not a valid {key}")

        for key in _POSITIVE:
            if not self._config[key] > 0:
                raise ConfigError(f"setting '{key}' must be positive, got {self._config[key]}")

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value by key"""
        return self._config.get(key, default)

    def reload(self):
        """Re-read pyproject.toml and the environment"""
        self._initialized = False
        self.__init__()

    def __getitem__(self, key: str) -> Any:
        return self._config[key]

    def __contains__(self, key: str) -> bool:
        return key in self._config


# Global instance
settings = SettingsLoader()
