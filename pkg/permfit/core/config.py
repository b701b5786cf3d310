import yaml
import os
import logging
from dataclasses import dataclass, field, asdict
from typing import List, Optional, Dict, Any

from .errors import ConfigError
from .models import MAX_SEED, TestConfig
from .regressors import RegressorSpec

logger = logging.getLogger(__name__)

# Default config filename, overridden by --config
CONFIG_FILENAME = "config.yaml"

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class AppConfig:
    """Tunables of the command-line front end. Library code takes TestConfig/RegressorSpec instead."""
    # --- Test settings ---
    alpha: float = 0.05
    n_permutations: int = 200
    master_seed: int = 20240611
    threads: int = 1
    # --- MLP reference regressor ---
    mlp_layers: List[int] = field(default_factory=lambda: [30, 30, 30])
    mlp_epochs: int = 500
    mlp_learning_rate: float = 0.01
    # --- Statistics and features ---
    huber_delta: float = 1.0
    fourier_k: Optional[int] = None  # None: largest k the shortest series allows
    # --- Simulation study ---
    sweep_replications: int = 100
    sweep_grid_steps: int = 11
    # --- Reports ---
    histogram_bins: int = 30
    # --- Logging ---
    log_level: str = "INFO"
    log_file: Optional[str] = None  # also log to this file when set

    def __post_init__(self):
        try:
            self.alpha = float(self.alpha)
            self.n_permutations = int(self.n_permutations)
            self.master_seed = int(self.master_seed)
            self.threads = int(self.threads)
            self.mlp_layers = [int(w) for w in self.mlp_layers]
            self.mlp_epochs = int(self.mlp_epochs)
            self.mlp_learning_rate = float(self.mlp_learning_rate)
            self.huber_delta = float(self.huber_delta)
            self.fourier_k = None if self.fourier_k is None else int(self.fourier_k)
            self.sweep_replications = int(self.sweep_replications)
            self.sweep_grid_steps = int(self.sweep_grid_steps)
            self.histogram_bins = int(self.histogram_bins)
            self.log_level = str(self.log_level).upper()
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Configuration value has the wrong type: {e}") from e

        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}.")
        if self.n_permutations < 1:
            raise ConfigError(f"n_permutations must be at least 1, got {self.n_permutations}.")
        if not 0 <= self.master_seed <= MAX_SEED:
            raise ConfigError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}.")
        if self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}.")
        if not self.mlp_layers or any(w < 1 for w in self.mlp_layers):
            raise ConfigError(f"mlp_layers must be a non-empty list of positive widths, got {self.mlp_layers}.")
        if self.mlp_epochs < 1 or not self.mlp_learning_rate > 0:
            raise ConfigError("mlp_epochs and mlp_learning_rate must be positive.")
        if not self.huber_delta > 0:
            raise ConfigError(f"huber_delta must be positive, got {self.huber_delta}.")
        if self.fourier_k is not None and self.fourier_k < 1:
            raise ConfigError(f"fourier_k must be at least 1, got {self.fourier_k}.")
        if self.sweep_replications < 1 or self.sweep_grid_steps < 1 or self.histogram_bins < 1:
            raise ConfigError("sweep_replications, sweep_grid_steps and histogram_bins must be positive.")
        if self.log_level not in LOG_LEVELS:
            raise ConfigError(f"log_level must be one of {LOG_LEVELS}, got '{self.log_level}'.")

    def to_test_config(self, exhaustive: bool = False) -> TestConfig:
        return TestConfig(alpha=self.alpha, n_permutations=self.n_permutations,
                          master_seed=self.master_seed, exhaustive=exhaustive)

    def to_regressor_spec(self, kind: str) -> RegressorSpec:
        return RegressorSpec(kind=kind, mlp_layers=tuple(self.mlp_layers),
                             mlp_epochs=self.mlp_epochs, mlp_learning_rate=self.mlp_learning_rate)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def load(cls, config_path: str = CONFIG_FILENAME) -> 'AppConfig':
        """Loads configuration from a YAML file."""
        if not os.path.exists(config_path):
            logger.warning(f"Configuration file '{config_path}' not found. Using default values.")
            return cls()

        try:
            with open(config_path, 'r', encoding='utf-8') as f:
                config_data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            logger.error(f"Error parsing configuration file '{config_path}': {e}")
            raise ConfigError(f"Cannot parse '{config_path}': {e}") from e

        if not config_data:  # empty file
            logger.warning(f"Configuration file '{config_path}' is empty. Using default values.")
            return cls()
        if not isinstance(config_data, dict):
            raise ConfigError(f"Configuration file '{config_path}' must hold a mapping, got {type(config_data).__name__}.")

        # Only keys defined on AppConfig; anything else is reported and dropped
        valid_keys = cls.__annotations__.keys()
        unknown = sorted(k for k in config_data if k not in valid_keys)
        if unknown:
            logger.warning(f"Ignoring unknown configuration keys in '{config_path}': {unknown}")
        filtered_config_data = {k: v for k, v in config_data.items() if k in valid_keys}

        try:
            return cls(**filtered_config_data)
        except ConfigError as e:
            logger.error(f"Invalid configuration in '{config_path}': {e}")
            raise
