"""
The permutation test for "does the model class fit more than noise".

1. fit the model class on the original pairing and score it -> r0
2. refit from scratch on every permuted pairing (x_i, y_tau(i)) with the same
   hyperparameters and score each refit -> reference sample
3. reject H0 iff r0 > q, the (1 - alpha) empirical quantile of the reference sample
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Tuple

import numpy as np

from .errors import DegenerateResponse, DimensionMismatch, DivergedTraining
from .models import Dataset, TestConfig, TestOutcome
from .permutation import PermutationPlan, empirical_quantile, exhaustive_plan, permutation_p_value, plan_for
from .regressors import RegressorSpec, fit, predict
from .rng import FIT_TAG, OBSERVED_FIT_TAG, RngPolicy
from .statistics import GofStatistic

logger = logging.getLogger(__name__)


def score(data: Dataset, spec: RegressorSpec, statistic: GofStatistic,
          fit_rng: Optional[np.random.Generator]) -> float:
    """Fits the model class on data (unless the statistic is model-free) and evaluates the statistic."""
    if not statistic.uses_predictions:
        return statistic.evaluate(data.column(0), data.responses)
    model = fit(data, spec, fit_rng)
    return statistic.evaluate(predict(model, data.predictors), data.responses)


def _check_inputs(data: Dataset, statistic: GofStatistic):
    if np.all(data.responses == data.responses[0]):
        raise DegenerateResponse("All responses are identical; there is nothing to permute.")
    if not statistic.uses_predictions and data.d != 1:
        raise DimensionMismatch(f"Statistic '{statistic.name}' needs exactly one predictor, got {data.d}.")


def reference_values(data: Dataset, spec: RegressorSpec, statistic: GofStatistic,
                     plan: PermutationPlan, policy: RngPolicy, threads: int = 1) -> Tuple[np.ndarray, int]:
    """
    Scores every permutation in the plan. Entry b always comes from permutation b
    and fit stream b, whatever the number of worker threads.
    A permuted fit that diverges is scored -inf. Returns (values, number diverged).
    """
    def task(b: int) -> float:
        permuted = data.permuted(plan.permutations[b])
        try:
            return score(permuted, spec, statistic, policy.stream(b, tag=FIT_TAG))
        except DivergedTraining as e:
            logger.warning(f"Permutation {b}: {e} Scoring it as -inf.")
            return float("-inf")

    indices = range(len(plan))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads, thread_name_prefix="PermFit") as pool:
            values = list(pool.map(task, indices))
    else:
        values = [task(b) for b in indices]

    reference = np.asarray(values, dtype=np.float64)
    n_diverged = int(np.count_nonzero(np.isneginf(reference)))
    return reference, n_diverged


def run_permutation_test(data: Dataset, spec: RegressorSpec, statistic: GofStatistic,
                         config: TestConfig, threads: int = 1) -> TestOutcome:
    """Runs the three-step test. The result is a pure function of (data, spec, statistic, config)."""
    _check_inputs(data, statistic)
    config.check_exhaustive(data.n)
    policy = RngPolicy(config.master_seed)

    logger.debug(f"Testing {spec.describe()} with '{statistic.name}' on n={data.n}, d={data.d}.")
    try:
        r0 = score(data, spec, statistic, policy.stream(0, tag=OBSERVED_FIT_TAG))
    except DivergedTraining:
        logger.error("Fit on the original pairing diverged; aborting the test.")
        raise

    plan = plan_for(data.n, config)
    reference, n_diverged = reference_values(data, spec, statistic, plan, policy, threads)
    if n_diverged:
        logger.warning(f"{n_diverged} of {len(plan)} permuted fits diverged.")

    q = empirical_quantile(reference, 1.0 - config.alpha)
    outcome = TestOutcome(
        r0=r0,
        reference=tuple(float(v) for v in reference),
        q=q,
        p_value=permutation_p_value(reference, r0),
        reject=bool(r0 > q),  # ties do not reject
        config_echo=config,
        statistic_name=statistic.name,
        model_kind=spec.describe() if statistic.uses_predictions else "model-free",
        n=data.n,
        d=data.d,
        n_diverged=n_diverged,
    )
    logger.debug(outcome.summary())
    return outcome


def exhaustive_reference(data: Dataset, spec: RegressorSpec, statistic: GofStatistic,
                         master_seed: int = 0, threads: int = 1) -> np.ndarray:
    """Statistic for all n! response orderings, in lexicographic permutation order. TooLarge for n > 8."""
    plan = exhaustive_plan(data.n)
    _check_inputs(data, statistic)
    values, _ = reference_values(data, spec, statistic, plan, RngPolicy(master_seed), threads)
    return values
