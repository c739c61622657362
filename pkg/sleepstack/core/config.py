"""
Configuration management for the SleepStack toolkit
"""

import os
import json
import logging
from typing import Dict, Any, Mapping, Optional

from .errors import UsageError


ENV_PREFIX = "SLEEPSTACK_"

DEFAULT_CONFIG: Dict[str, Any] = {
    "seed": 0,
    "threads": os.cpu_count() or 1,
    "scheme": 6,
    "task": "sc",
    "channel": "EEG Fpz-Cz",
    # trainer
    "max_lr": 0.001,
    "lr_decay_every": 10,
    "lr_decay_factor": 10.0,
    "batch_size": 64,
    "num_epochs": 30,
    "augmentation": True,
    "keep_prob": 0.5,
    "eval_batch_size": 128,
    # nn layers
    "bn_epsilon": 1e-5,
    "bn_momentum": 0.99,
    "adam_beta1": 0.9,
    "adam_beta2": 0.999,
    "adam_eps": 1e-8,
    # baseline
    "n_trees": 71,
    "tree_max_depth": 12,
    "tree_min_leaf": 5,
    "filter_order": 4,
    "bands": {
        "delta": [0.5, 4.0],
        "theta": [4.0, 8.0],
        "alpha": [8.0, 13.0],
        "beta": [13.0, 30.0],
        "gamma": [30.0, 49.9],
    },
    "mmd_window": 100,
    # analysis
    "rolloff_fraction": 0.85,
    "spectral_window": "hann",
    "feature_scaling": "minmax",
    "kde_points": 512,
    "kde_features": ["energy_sis:gamma", "spectral_rolloff:gamma"],
    "significance_level": 0.001,
    # split
    "test_fraction": None,
}

logger = logging.getLogger(__name__)


def coerce_value(key: str, value: Any) -> Any:
    """
    Convert a raw (usually string) value to the type of the key's default

    Args:
        key: Configuration key, must exist in DEFAULT_CONFIG
        value: Raw value, typically read from the environment

    Returns:
        The typed value
    """
    if key not in DEFAULT_CONFIG:
        raise UsageError(
            f"Unknown configuration key: {key}. "
            f"Valid keys: {', '.join(sorted(DEFAULT_CONFIG))}"
        )
    if not isinstance(value, str):
        return value

    default_value = DEFAULT_CONFIG[key]

    if isinstance(default_value, bool):
        if value.lower() in ("yes", "true", "1", "y", "t"):
            return True
        if value.lower() in ("no", "false", "0", "n", "f"):
            return False
        raise UsageError(f"Invalid boolean value for {key}: {value}")
    if isinstance(default_value, int):
        try:
            return int(value)
        except ValueError:
            raise UsageError(f"Invalid integer value for {key}: {value}")
    if isinstance(default_value, float):
        try:
            return float(value)
        except ValueError:
            raise UsageError(f"Invalid number for {key}: {value}")
    if isinstance(default_value, (list, dict)):
        try:
            return json.loads(value)
        except json.JSONDecodeError as e:
            raise UsageError(f"Invalid JSON value for {key}: {e}")
    if default_value is None and value.lower() in ("none", "null"):
        return None
    if default_value is None:
        try:
            return json.loads(value)
        except json.JSONDecodeError:
            return value
    return value


class Config:
    """Resolves the effective run configuration from layered sources"""

    def __init__(
        self,
        config_file: Optional[str] = None,
        overrides: Optional[Mapping[str, Any]] = None,
        environ: Optional[Mapping[str, str]] = None,
    ):
        self.config_file = config_file
        self._sources: Dict[str, str] = {key: "Default" for key in DEFAULT_CONFIG}
        self.config = self._resolve(
            config_file, overrides or {}, os.environ if environ is None else environ
        )

    def _resolve(
        self,
        config_file: Optional[str],
        overrides: Mapping[str, Any],
        environ: Mapping[str, str],
    ) -> Dict[str, Any]:
        """Merge defaults < environment < config file < flags"""
        config = dict(DEFAULT_CONFIG)

        for name, raw in environ.items():
            if not name.startswith(ENV_PREFIX):
                continue
            key = name[len(ENV_PREFIX):].lower()
            if key not in DEFAULT_CONFIG:
                logger.debug(f"Ignoring unknown environment override {name}")
                continue
            config[key] = coerce_value(key, raw)
            self._sources[key] = "Env"

        if config_file is not None:
            for key, value in self._load_file(config_file).items():
                config[key] = coerce_value(key, value)
                self._sources[key] = "File"

        for key, value in overrides.items():
            if value is None:
                continue
            config[key] = coerce_value(key, value)
            self._sources[key] = "Flag"

        return config

    def _load_file(self, path: str) -> Dict[str, Any]:
        """Load a JSON config file"""
        if not os.path.isfile(path):
            raise UsageError(f"Config file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise UsageError(f"Error reading config file {path}: {e}")
        if not isinstance(data, dict):
            raise UsageError(f"Config file {path} must hold a JSON object")
        unknown = sorted(set(data) - set(DEFAULT_CONFIG))
        if unknown:
            raise UsageError(f"Unknown configuration keys in {path}: {', '.join(unknown)}")
        return data

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value"""
        return self.config.get(key, default)

    def __getitem__(self, key: str) -> Any:
        return self.config[key]

    def source(self, key: str) -> str:
        """Where the effective value of a key came from"""
        return self._sources.get(key, "Default")

    def sources(self) -> Dict[str, str]:
        return dict(self._sources)

    def as_dict(self) -> Dict[str, Any]:
        return dict(self.config)

    def save(self, path: str) -> None:
        """Write the effective configuration as JSON"""
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.config, f, indent=2, sort_keys=True)
            f.write("\n")


def write_default_config(path: str) -> None:
    """Write the default configuration as a JSON template"""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(DEFAULT_CONFIG, f, indent=2, sort_keys=True)
        f.write("\n")
