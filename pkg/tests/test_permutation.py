import math

import numpy as np
import pytest

from permfit.core.errors import ConfigError, TooLarge, TooSmall
from permfit.core.models import TestConfig
from permfit.core.permutation import (EXHAUSTIVE, SAMPLED, empirical_quantile, exhaustive_plan, plan_for,
                                      sample_permutations)
from permfit.core.rng import RngPolicy


def test_sampled_rows_are_bijections():
    plan = sample_permutations(5, 100, RngPolicy(1))
    assert plan.mode == SAMPLED
    assert plan.permutations.shape == (100, 5)
    for row in plan.permutations:
        assert sorted(row) == [0, 1, 2, 3, 4]


def test_sampled_plan_is_reproducible():
    first = sample_permutations(7, 50, RngPolicy(99))
    second = sample_permutations(7, 50, RngPolicy(99))
    assert np.array_equal(first.permutations, second.permutations)
    other = sample_permutations(7, 50, RngPolicy(100))
    assert not np.array_equal(first.permutations, other.permutations)


def test_identity_frequency_for_two_items():
    plan = sample_permutations(2, 10000, RngPolicy(2024))
    identity = np.mean(plan.permutations[:, 0] == 0)
    assert abs(identity - 0.5) <= 0.015


def test_sampled_plan_errors():
    with pytest.raises(TooSmall):
        sample_permutations(1, 10, RngPolicy(0))
    with pytest.raises(TooSmall):
        sample_permutations(5, 0, RngPolicy(0))


def test_exhaustive_plan_is_complete_and_lexicographic():
    plan = exhaustive_plan(4)
    assert plan.mode == EXHAUSTIVE
    assert len(plan) == math.factorial(4)
    rows = [tuple(row) for row in plan.permutations]
    assert len(set(rows)) == 24
    assert rows == sorted(rows)
    assert rows[0] == (0, 1, 2, 3)


def test_exhaustive_plan_limit():
    assert len(exhaustive_plan(8)) == 40320
    with pytest.raises(TooLarge):
        exhaustive_plan(9)


def test_plan_for_follows_config():
    assert plan_for(5, TestConfig(n_permutations=30)).mode == SAMPLED
    assert len(plan_for(5, TestConfig(exhaustive=True))) == 120
    with pytest.raises(ConfigError):
        plan_for(9, TestConfig(exhaustive=True))


def test_quantile_of_first_200_integers():
    sample = np.arange(1.0, 201.0)
    assert empirical_quantile(sample, 0.95) == 190.0
    assert empirical_quantile(sample[::-1], 0.95) == 190.0


def test_quantile_single_element():
    assert empirical_quantile([4.2], 0.05) == 4.2
    assert empirical_quantile([4.2], 0.99) == 4.2


def test_quantile_matches_sort_oracle(rng):
    for _ in range(1000):
        size = int(rng.integers(1, 60))
        sample = rng.standard_normal(size)
        level = float(rng.uniform(0.001, 0.999))
        index = min(max(math.ceil(level * size), 1), size)
        assert empirical_quantile(sample, level) == np.sort(sample)[index - 1]


def test_quantile_handles_negative_infinity():
    sample = [float("-inf")] * 3 + [1.0, 2.0]
    assert empirical_quantile(sample, 0.8) == 1.0


def test_quantile_of_empty_sample():
    with pytest.raises(TooSmall):
        empirical_quantile([], 0.5)
