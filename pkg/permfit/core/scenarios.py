"""
Named synthetic data-generating processes used by the simulation study.

    null_uniform          X1, X2 ~ N(0,1), Y ~ U[0,1], all independent
    quad_example          X1, X2 ~ N(0,1), Y = X1^2 + X2^2 + eps, eps ~ N(0, noise_sd^2)
    log_quad              X1 ~ N(1,1), X2 ~ N(0,1), Y = log|X1| + X2^2 + eps
    log_quad_mean_sweep   X1 ~ N(a,1), X2 ~ N(0, sd2^2), Y = log|X1| + X2^2 + eps
    bivariate_normal      (X, Y) standard bivariate normal with correlation rho
    lognormal_univariate  X ~ N(a,1), Y = log|X| + eps
    null_bivariate        bivariate_normal with rho = 0

The second argument of N(.,.) above is a variance; every noise_sd and sd2
parameter is a standard deviation.
"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, Optional

import numpy as np

from .errors import InvalidParams, UnknownScenario
from .models import Dataset, MAX_SEED, validate_dataset

logger = logging.getLogger(__name__)

PARAM_NAMES = ("a", "rho", "sd2", "noise_sd")

# Accepted parameters and their defaults, per scenario
SIGNATURES: Dict[str, Dict[str, float]] = {
    "null_uniform": {},
    "quad_example": {"noise_sd": 0.01},
    "log_quad": {"noise_sd": 1.0},
    "log_quad_mean_sweep": {"a": 0.0, "sd2": 0.1, "noise_sd": 0.1},
    "bivariate_normal": {"rho": 0.0},
    "lognormal_univariate": {"a": 5.0, "noise_sd": 1.0},
    "null_bivariate": {},
}


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    n: int = 100
    seed: int = 0
    a: Optional[float] = None
    rho: Optional[float] = None
    sd2: Optional[float] = None
    noise_sd: Optional[float] = None

    def __post_init__(self):
        if self.name not in SIGNATURES:
            raise UnknownScenario(f"Unknown scenario '{self.name}', expected one of {sorted(SIGNATURES)}.")
        signature = SIGNATURES[self.name]
        for param in PARAM_NAMES:
            if getattr(self, param) is not None and param not in signature:
                raise InvalidParams(f"Scenario '{self.name}' takes no parameter '{param}'.")
        if int(self.n) != self.n or self.n < 2:
            raise InvalidParams(f"Sample size must be an integer >= 2, got {self.n}.")
        if not 0 <= int(self.seed) <= MAX_SEED:
            raise InvalidParams(f"Seed must be a 64-bit unsigned integer, got {self.seed}.")
        values = self.resolved_params()
        if "rho" in values and not 0.0 <= values["rho"] <= 1.0:
            raise InvalidParams(f"rho must lie in [0, 1], got {values['rho']}.")
        for sd in ("sd2", "noise_sd"):
            if sd in values and not values[sd] > 0:
                raise InvalidParams(f"{sd} must be positive, got {values[sd]}.")

    def resolved_params(self) -> Dict[str, float]:
        """The scenario's parameters with defaults filled in."""
        return {param: float(getattr(self, param)) if getattr(self, param) is not None else default
                for param, default in SIGNATURES[self.name].items()}

    def with_value(self, axis: str, value) -> 'ScenarioSpec':
        """Copy with one parameter (or n, or seed) replaced."""
        if axis == "n":
            return replace(self, n=int(value))
        if axis == "seed":
            return replace(self, seed=int(value))
        if axis not in SIGNATURES[self.name]:
            raise InvalidParams(f"Scenario '{self.name}' cannot vary '{axis}'.")
        return replace(self, **{axis: float(value)})

    def to_dict(self) -> dict:
        return {"name": self.name, "n": self.n, "seed": self.seed, **self.resolved_params()}


def generate(scenario: ScenarioSpec) -> Dataset:
    """Draws a dataset from the named law. Deterministic given scenario.seed."""
    rng = np.random.default_rng(int(scenario.seed))
    n = scenario.n
    p = scenario.resolved_params()
    name = scenario.name

    if name == "null_uniform":
        X = rng.standard_normal((n, 2))
        y = rng.uniform(0.0, 1.0, size=n)
    elif name == "quad_example":
        X = rng.standard_normal((n, 2))
        y = X[:, 0] ** 2 + X[:, 1] ** 2 + rng.normal(0.0, p["noise_sd"], size=n)
    elif name in ("log_quad", "log_quad_mean_sweep"):
        mean1 = 1.0 if name == "log_quad" else p["a"]
        sd2 = 1.0 if name == "log_quad" else p["sd2"]
        x1 = rng.normal(mean1, 1.0, size=n)
        x2 = rng.normal(0.0, sd2, size=n)
        y = np.log(np.abs(x1)) + x2 ** 2 + rng.normal(0.0, p["noise_sd"], size=n)
        X = np.column_stack([x1, x2])
    elif name in ("bivariate_normal", "null_bivariate"):
        rho = p.get("rho", 0.0)
        z = rng.standard_normal((n, 2))
        x = z[:, 0]
        # exact for rho = 1, where the covariance matrix is singular
        y = rho * z[:, 0] + np.sqrt(1.0 - rho ** 2) * z[:, 1]
        X = x.reshape(-1, 1)
    elif name == "lognormal_univariate":
        x = rng.normal(p["a"], 1.0, size=n)
        y = np.log(np.abs(x)) + rng.normal(0.0, p["noise_sd"], size=n)
        X = x.reshape(-1, 1)
    else:  # guarded by ScenarioSpec
        raise UnknownScenario(name)

    return validate_dataset(X, y)
