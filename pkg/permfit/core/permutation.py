"""Permutation plans, empirical quantiles and permutation p-values."""
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import TooLarge, TooSmall
from .models import MAX_EXHAUSTIVE_N, TestConfig
from .rng import PERMUTATION_TAG, RngPolicy

logger = logging.getLogger(__name__)

SAMPLED = "sampled"
EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True, eq=False)
class PermutationPlan:
    """The response reorderings tau to evaluate; row b is a bijection on {0..n-1}."""
    mode: str
    permutations: np.ndarray  # shape (B, n), int64

    def __len__(self) -> int:
        return self.permutations.shape[0]

    @property
    def n(self) -> int:
        return self.permutations.shape[1]


def sample_permutations(n: int, count: int, rng: RngPolicy) -> PermutationPlan:
    """
    Draws count permutations of n items i.i.d. uniformly (Fisher-Yates on stream b).
    Draws are with replacement across b and the identity is not excluded.
    """
    if n < 2:
        raise TooSmall(f"Need n >= 2 to permute, got {n}.")
    if count < 1:
        raise TooSmall(f"Need at least one permutation, got {count}.")
    rows = np.empty((count, n), dtype=np.int64)
    for b in range(count):
        rows[b] = rng.stream(b, tag=PERMUTATION_TAG).permutation(n)
    return PermutationPlan(SAMPLED, rows)


def exhaustive_plan(n: int) -> PermutationPlan:
    """All n! permutations in lexicographic order."""
    if n > MAX_EXHAUSTIVE_N:
        raise TooLarge(f"Exhaustive enumeration is limited to n <= {MAX_EXHAUSTIVE_N}, got n={n}.")
    if n < 2:
        raise TooSmall(f"Need n >= 2 to permute, got {n}.")
    rows = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    logger.debug(f"Enumerated all {len(rows)} permutations of {n} responses.")
    return PermutationPlan(EXHAUSTIVE, rows)


def plan_for(n: int, config: TestConfig) -> PermutationPlan:
    config.check_exhaustive(n)
    if config.exhaustive:
        return exhaustive_plan(n)
    return sample_permutations(n, config.n_permutations, RngPolicy(config.master_seed))


def empirical_quantile(sample, level: float) -> float:
    """Order statistic of the sample at 1-based index ceil(level * B)."""
    values = np.asarray(sample, dtype=np.float64).ravel()
    count = values.size
    if count < 1:
        raise TooSmall("Quantile of an empty sample is undefined.")
    # the tolerance keeps e.g. 0.95 * 200 from landing on index 191 through rounding
    k = math.ceil(level * count - 1e-9)
    k = min(max(k, 1), count)
    return float(np.partition(values, k - 1)[k - 1])


def permutation_p_value(reference, observed: float) -> float:
    """(1 + #{reference >= observed}) / (B + 1); never exactly zero."""
    values = np.asarray(reference, dtype=np.float64)
    return float((1 + np.count_nonzero(values >= observed)) / (values.size + 1))
