import logging
import math
from dataclasses import dataclass, asdict
from typing import Any, Dict, Tuple

import numpy as np

from .errors import ConfigError, DimensionMismatch, NonFinite, TooSmall

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_N = 8  # 8! = 40320 refits; 9! is already 362880
MAX_SEED = 2**64 - 1


@dataclass(frozen=True, eq=False)
class Dataset:
    """A paired sample: n rows of predictors and the n responses observed with them."""
    predictors: np.ndarray  # shape (n, d), float64, read-only
    responses: np.ndarray   # shape (n,), float64, read-only

    @property
    def n(self) -> int:
        return self.predictors.shape[0]

    @property
    def d(self) -> int:
        return self.predictors.shape[1]

    def permuted(self, order: np.ndarray) -> 'Dataset':
        """Returns the dataset with responses re-paired as y[order[i]] for row i."""
        responses = self.responses[np.asarray(order)]
        responses.setflags(write=False)
        return Dataset(self.predictors, responses)

    def column(self, j: int) -> np.ndarray:
        return self.predictors[:, j]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (np.array_equal(self.predictors, other.predictors)
                and np.array_equal(self.responses, other.responses))

    __hash__ = None


def validate_dataset(raw_predictors: Any, raw_responses: Any = None) -> Dataset:
    """
    Builds a Dataset from arbitrary numeric arrays.
    A 1-D predictor array is treated as a single column; a Dataset passed alone is returned as is.
    Raises DimensionMismatch, TooSmall or NonFinite.
    """
    if isinstance(raw_predictors, Dataset) and raw_responses is None:
        return raw_predictors
    try:
        predictors = np.array(raw_predictors, dtype=np.float64, copy=True)
        responses = np.array(raw_responses, dtype=np.float64, copy=True)
    except (TypeError, ValueError) as e:
        raise NonFinite(f"Input is not numeric: {e}") from e

    if predictors.ndim == 1:
        predictors = predictors.reshape(-1, 1)
    if predictors.ndim != 2:
        raise DimensionMismatch(f"Predictors must be a matrix, got {predictors.ndim} dimensions.")
    if responses.ndim == 2 and responses.shape[1] == 1:
        responses = responses[:, 0]
    if responses.ndim != 1:
        raise DimensionMismatch(f"Responses must be a vector, got shape {responses.shape}.")
    if predictors.shape[0] != responses.shape[0]:
        raise DimensionMismatch(
            f"Predictor rows ({predictors.shape[0]}) differ from response length ({responses.shape[0]}).")
    if predictors.shape[1] < 1:
        raise DimensionMismatch("At least one predictor column is required.")
    if predictors.shape[0] < 2:
        raise TooSmall(f"At least 2 observations are required, got {predictors.shape[0]}.")
    if not np.all(np.isfinite(predictors)):
        bad_row, bad_col = np.argwhere(~np.isfinite(predictors))[0]
        raise NonFinite(f"Predictor entry ({bad_row}, {bad_col}) is not finite.")
    if not np.all(np.isfinite(responses)):
        bad_row = int(np.flatnonzero(~np.isfinite(responses))[0])
        raise NonFinite(f"Response entry {bad_row} is not finite.")

    predictors.setflags(write=False)
    responses.setflags(write=False)
    return Dataset(predictors, responses)


@dataclass(frozen=True)
class TestConfig:
    """Settings of a single permutation test."""
    __test__ = False  # keep pytest from collecting this class

    alpha: float = 0.05
    n_permutations: int = 200
    master_seed: int = 0
    exhaustive: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}.")
        if int(self.n_permutations) != self.n_permutations or self.n_permutations < 1:
            raise ConfigError(f"n_permutations must be a positive integer, got {self.n_permutations}.")
        if not 0 <= int(self.master_seed) <= MAX_SEED:
            raise ConfigError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}.")

    def check_exhaustive(self, n: int):
        """Exhaustive enumeration is only allowed for small samples."""
        if self.exhaustive and n > MAX_EXHAUSTIVE_N:
            raise ConfigError(f"Exhaustive mode needs n <= {MAX_EXHAUSTIVE_N}, got n={n}.")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TestConfig':
        return cls(alpha=float(data["alpha"]), n_permutations=int(data["n_permutations"]),
                   master_seed=int(data["master_seed"]), exhaustive=bool(data["exhaustive"]))


@dataclass(frozen=True)
class TestOutcome:
    """Result of one permutation test."""
    __test__ = False

    r0: float
    reference: Tuple[float, ...]
    q: float
    p_value: float
    reject: bool
    config_echo: TestConfig
    statistic_name: str
    model_kind: str = ""
    n: int = 0
    d: int = 0
    n_diverged: int = 0  # permuted fits that diverged and were scored -inf

    @property
    def reference_array(self) -> np.ndarray:
        return np.asarray(self.reference, dtype=np.float64)

    @property
    def n_reference(self) -> int:
        return len(self.reference)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "statistic_name": self.statistic_name,
            "model_kind": self.model_kind,
            "n": self.n,
            "d": self.d,
            "r0": self.r0,
            "q": self.q,
            "p_value": self.p_value,
            "reject": self.reject,
            "n_diverged": self.n_diverged,
            "config": self.config_echo.to_dict(),
            "reference": list(self.reference),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TestOutcome':
        return cls(
            r0=float(data["r0"]),
            reference=tuple(float(v) for v in data["reference"]),
            q=float(data["q"]),
            p_value=float(data["p_value"]),
            reject=bool(data["reject"]),
            config_echo=TestConfig.from_dict(data["config"]),
            statistic_name=str(data["statistic_name"]),
            model_kind=str(data.get("model_kind", "")),
            n=int(data.get("n", 0)),
            d=int(data.get("d", 0)),
            n_diverged=int(data.get("n_diverged", 0)),
        )

    def summary(self) -> str:
        decision = "reject H0" if self.reject else "do not reject H0"
        r0 = f"{self.r0:.4f}" if math.isfinite(self.r0) else str(self.r0)
        return (f"{self.statistic_name}: observed={r0}, q={self.q:.4f}, "
                f"p={self.p_value:.4f} over {self.n_reference} permutations -> {decision}")
