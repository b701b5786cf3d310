"""
Simulation harness: rejection-rate sweeps over a scenario parameter, and
paired comparisons of several tests on identical replicate datasets.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .engine import run_permutation_test
from .errors import DimensionMismatch, InvalidParams, TooSmall
from .models import Dataset, TestConfig, TestOutcome
from .regressors import RegressorSpec
from .rng import RngPolicy
from .scenarios import ScenarioSpec, generate
from .statistics import GofStatistic, RANK_METHODS, rank_independence_test

logger = logging.getLogger(__name__)

AXES = ("a", "rho", "n", "sd2", "noise_sd")
DATA_TAG = "data"
TEST_TAG = "test"


def default_grid(axis: str, steps: int) -> Tuple[float, ...]:
    """Figure ranges: a in [0, 10], rho in [0, 1], n in [10, 1000]."""
    if steps < 1:
        raise InvalidParams(f"A grid needs at least one point, got {steps}.")
    if axis == "a":
        return tuple(float(v) for v in np.linspace(0.0, 10.0, steps))
    if axis == "rho":
        return tuple(float(v) for v in np.linspace(0.0, 1.0, steps))
    if axis == "n":
        return tuple(float(v) for v in np.unique(np.round(np.linspace(10, 1000, steps))))
    if axis in ("sd2", "noise_sd"):
        return tuple(float(v) for v in np.linspace(0.1, 1.0, steps))
    raise InvalidParams(f"Unknown sweep axis '{axis}', expected one of {AXES}.")


@dataclass(frozen=True)
class SweepPlan:
    """A scenario family: the base scenario with one parameter varied over a grid."""
    scenario: ScenarioSpec
    axis: str
    grid: Tuple[float, ...]

    def __post_init__(self):
        if self.axis not in AXES:
            raise InvalidParams(f"Unknown sweep axis '{self.axis}', expected one of {AXES}.")
        if not self.grid:
            raise InvalidParams("Sweep grid is empty.")
        object.__setattr__(self, "grid", tuple(float(v) for v in self.grid))
        for value in self.grid:  # fail fast on values the scenario rejects
            self.scenario_at(value)

    def scenario_at(self, value: float) -> ScenarioSpec:
        return self.scenario.with_value(self.axis, value)


@dataclass(frozen=True)
class ReplicateResult:
    reject: bool
    observed: float
    quantile: float
    p_value: float


class PermutationProcedure:
    """The model-class permutation test with a given regressor and statistic."""

    def __init__(self, spec: RegressorSpec, statistic: GofStatistic):
        self.spec = spec
        self.statistic = statistic

    @property
    def label(self) -> str:
        if not self.statistic.uses_predictions:
            return self.statistic.name
        return f"{self.statistic.name}/{self.spec.describe()}"

    def run(self, data: Dataset, config: TestConfig) -> ReplicateResult:
        outcome: TestOutcome = run_permutation_test(data, self.spec, self.statistic, config)
        return ReplicateResult(outcome.reject, outcome.r0, outcome.q, outcome.p_value)


class RankProcedure:
    """Spearman or Kendall permutation test of independence between one predictor column and Y."""

    def __init__(self, method: str, column: int = 0):
        if method not in RANK_METHODS:
            raise InvalidParams(f"Unknown rank method '{method}', expected one of {RANK_METHODS}.")
        self.method = method
        self.column = column

    @property
    def label(self) -> str:
        return f"{self.method}[x{self.column + 1}]"

    def run(self, data: Dataset, config: TestConfig) -> ReplicateResult:
        if not 0 <= self.column < data.d:
            raise DimensionMismatch(f"{self.label} needs predictor column {self.column + 1}, "
                                    f"the dataset has {data.d}.")
        result = rank_independence_test(data.column(self.column), data.responses, self.method, config)
        return ReplicateResult(result.reject, abs(result.statistic), result.quantile, result.p_value)


@dataclass(frozen=True)
class SweepResult:
    label: str
    axis: str
    grid: Tuple[float, ...]
    rejection_rate: Tuple[float, ...]
    replications: int
    per_point_outcomes: Tuple[Tuple[bool, ...], ...] = ()
    per_point_r0: Tuple[Tuple[float, ...], ...] = ()
    per_point_q: Tuple[Tuple[float, ...], ...] = ()

    def mean_quantile(self) -> Tuple[float, ...]:
        """Average (1 - alpha) permutation quantile per grid point, over replicates with a finite quantile."""
        means = []
        for row in self.per_point_q:
            finite = np.asarray(row, dtype=np.float64)
            finite = finite[np.isfinite(finite)]
            means.append(float(finite.mean()) if finite.size else float("nan"))
        return tuple(means)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "axis": self.axis,
            "grid": list(self.grid),
            "rejection_rate": list(self.rejection_rate),
            "replications": self.replications,
            "per_point_outcomes": [list(row) for row in self.per_point_outcomes],
            "per_point_r0": [list(row) for row in self.per_point_r0],
            "per_point_q": [list(row) for row in self.per_point_q],
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'SweepResult':
        return cls(
            label=str(data["label"]),
            axis=str(data["axis"]),
            grid=tuple(float(v) for v in data["grid"]),
            rejection_rate=tuple(float(v) for v in data["rejection_rate"]),
            replications=int(data["replications"]),
            per_point_outcomes=tuple(tuple(bool(v) for v in row) for row in data.get("per_point_outcomes", [])),
            per_point_r0=tuple(tuple(float(v) for v in row) for row in data.get("per_point_r0", [])),
            per_point_q=tuple(tuple(float(v) for v in row) for row in data.get("per_point_q", [])),
        )


def replicate_dataset(plan: SweepPlan, g: int, r: int, master_seed: int) -> Dataset:
    """Dataset of replicate r at grid point g; shared by every compared test."""
    seed = RngPolicy(master_seed).derive_seed(g, r, tag=DATA_TAG)
    return generate(plan.scenario_at(plan.grid[g]).with_value("seed", seed))


def compare_tests(plan: SweepPlan, procedures: Sequence, config: TestConfig,
                  replications: int, threads: int = 1) -> List[SweepResult]:
    """
    Evaluates every procedure on the same replicate datasets (paired comparison).
    Replicates run concurrently; results are keyed by (grid index, replicate index).
    """
    if replications < 1:
        raise TooSmall(f"Need at least one replication, got {replications}.")
    if not procedures:
        raise InvalidParams("No tests to compare.")
    policy = RngPolicy(config.master_seed)

    def task(key: Tuple[int, int]) -> List[ReplicateResult]:
        g, r = key
        data = replicate_dataset(plan, g, r, config.master_seed)
        replicate_config = replace(config, master_seed=policy.derive_seed(g, r, tag=TEST_TAG))
        return [procedure.run(data, replicate_config) for procedure in procedures]

    keys = [(g, r) for g in range(len(plan.grid)) for r in range(replications)]
    logger.info(f"Sweeping {plan.scenario.name} over {plan.axis} ({len(plan.grid)} points x "
                f"{replications} replicates) for {[p.label for p in procedures]}.")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads, thread_name_prefix="Replicate") as pool:
            collected: Dict[Tuple[int, int], List[ReplicateResult]] = dict(zip(keys, pool.map(task, keys)))
    else:
        collected = {key: task(key) for key in keys}

    results = []
    for i, procedure in enumerate(procedures):
        outcomes, r0s, qs, rates = [], [], [], []
        for g, value in enumerate(plan.grid):
            replicate_results = [collected[(g, r)][i] for r in range(replications)]
            row = tuple(bool(rr.reject) for rr in replicate_results)
            outcomes.append(row)
            r0s.append(tuple(float(rr.observed) for rr in replicate_results))
            qs.append(tuple(float(rr.quantile) for rr in replicate_results))
            rates.append(float(np.mean(row)))
            logger.info(f"{procedure.label}: {plan.axis}={value:g} -> rejection rate {rates[-1]:.3f}")
        results.append(SweepResult(label=procedure.label, axis=plan.axis, grid=plan.grid,
                                   rejection_rate=tuple(rates), replications=replications,
                                   per_point_outcomes=tuple(outcomes), per_point_r0=tuple(r0s),
                                   per_point_q=tuple(qs)))
    return results


def rejection_rate_sweep(plan: SweepPlan, spec: RegressorSpec, statistic: GofStatistic,
                         config: TestConfig, replications: int, threads: int = 1) -> SweepResult:
    """Fraction of replicates rejecting H0 at each grid point."""
    return compare_tests(plan, [PermutationProcedure(spec, statistic)], config, replications, threads)[0]


def demo_example(spec: RegressorSpec, statistic: GofStatistic, config: TestConfig,
                 n: int = 10, threads: int = 1) -> Tuple[Dataset, TestOutcome]:
    """The small-sample motivating example: Y = X1^2 + X2^2 + eps with n = 10."""
    data = generate(ScenarioSpec("quad_example", n=n, seed=config.master_seed))
    return data, run_permutation_test(data, spec, statistic, config, threads)
