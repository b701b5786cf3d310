"""
Goodness-of-fit statistics and rank-based independence baselines.

Every GofStatistic is oriented so that a larger value means a better fit; the
permutation engine then rejects when the observed value exceeds the quantile.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.special
import scipy.stats

from .errors import DegenerateInput, DegenerateResponse, DimensionMismatch, NonFinite, TooSmall
from .models import TestConfig
from .permutation import empirical_quantile, permutation_p_value, plan_for

logger = logging.getLogger(__name__)

SPEARMAN = "spearman"
KENDALL = "kendall"
RANK_METHODS = (SPEARMAN, KENDALL)


@dataclass(frozen=True)
class GofStatistic:
    """
    A goodness-of-fit functional. With uses_predictions the evaluator receives
    (fitted predictions, responses); otherwise it is model-free and receives
    (the single predictor column, responses).
    """
    name: str
    evaluator: Callable[[np.ndarray, np.ndarray], float]
    uses_predictions: bool = True

    def evaluate(self, first: np.ndarray, responses: np.ndarray) -> float:
        return float(self.evaluator(first, responses))


@dataclass(frozen=True)
class RankTestResult:
    statistic: float
    p_value: float
    method: str
    reject: bool = False
    quantile: float = 0.0  # (1 - alpha) quantile of the |statistic| reference sample


def _paired(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionMismatch(f"Vectors differ in length: {a.size} vs {b.size}.")
    return a, b


def r_squared(predictions, responses) -> float:
    """1 - SSE/SST on the given sample; can be negative for models without an intercept."""
    y_hat, y = _paired(predictions, responses)
    if y.size < 2:
        raise TooSmall(f"R² needs at least 2 observations, got {y.size}.")
    if np.all(y == y[0]):
        raise DegenerateResponse("All responses are identical; R² is undefined.")
    sse = np.sum((y - y_hat) ** 2)
    sst = np.sum((y - y.mean()) ** 2)
    return float(1.0 - sse / sst)


def pesarin_statistic(x, y) -> float:
    """T* = sum_i x_i y_i, the linear-regression permutation statistic (single predictor)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        if x.shape[1] != 1:
            raise DimensionMismatch(f"T* needs a single predictor column, got {x.shape[1]}.")
        x = x[:, 0]
    x, y = _paired(x, y)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise NonFinite("T* inputs must be finite.")
    # correctly rounded sum of the products
    return math.fsum(x * y)


def absolute_risk(predictions, responses) -> float:
    """Negated mean absolute error."""
    y_hat, y = _paired(predictions, responses)
    return float(-np.mean(np.abs(y - y_hat)))


def huber_risk(predictions, responses, delta: float = 1.0) -> float:
    """Negated mean Huber loss with threshold delta."""
    y_hat, y = _paired(predictions, responses)
    return float(-np.mean(scipy.special.huber(delta, y - y_hat)))


def _check_rank_inputs(x, y):
    x, y = _paired(x, y)
    if x.size < 3:
        raise TooSmall(f"Rank correlation needs at least 3 observations, got {x.size}.")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInput("Rank correlation is undefined for a constant vector.")
    return x, y


def spearman_rho(x, y) -> float:
    """Pearson correlation of mid-ranks."""
    x, y = _check_rank_inputs(x, y)
    return float(scipy.stats.spearmanr(x, y)[0])


def kendall_tau(x, y) -> float:
    """Kendall's tau-b with the usual tie corrections."""
    x, y = _check_rank_inputs(x, y)
    return float(scipy.stats.kendalltau(x, y)[0])


_RANK_STATISTICS = {SPEARMAN: spearman_rho, KENDALL: kendall_tau}


def rank_independence_test(x, y, method: str, config: TestConfig) -> RankTestResult:
    """
    Two-sided permutation test of independence based on |rho| or |tau|, using the
    same permutation plans (and seeds) as the regression permutation test.
    """
    if method not in _RANK_STATISTICS:
        raise ValueError(f"Unknown rank method '{method}', expected one of {RANK_METHODS}.")
    statistic = _RANK_STATISTICS[method]
    x, y = _check_rank_inputs(x, y)
    observed = statistic(x, y)

    plan = plan_for(x.size, config)
    reference = np.array([abs(statistic(x, y[order])) for order in plan.permutations])
    p_value = permutation_p_value(reference, abs(observed))
    return RankTestResult(statistic=observed, p_value=p_value, method=method, reject=p_value <= config.alpha,
                          quantile=empirical_quantile(reference, 1.0 - config.alpha))


# --- Registry used by the engine and the CLI ---

R2 = GofStatistic("r2", r_squared)
TSTAR = GofStatistic("tstar", pesarin_statistic, uses_predictions=False)
ABS_RISK = GofStatistic("abs-risk", absolute_risk)
STATISTIC_NAMES = ("r2", "tstar", "abs-risk", "huber-risk")


def get_statistic(name: str, huber_delta: float = 1.0) -> GofStatistic:
    if name == "r2":
        return R2
    if name == "tstar":
        return TSTAR
    if name == "abs-risk":
        return ABS_RISK
    if name == "huber-risk":
        if not huber_delta > 0:
            raise ValueError(f"huber_delta must be positive, got {huber_delta}.")
        return GofStatistic("huber-risk", lambda y_hat, y: huber_risk(y_hat, y, huber_delta))
    raise ValueError(f"Unknown statistic '{name}', expected one of {STATISTIC_NAMES}.")
