import hashlib

import numpy as np
import pytest

from permfit.core.errors import ConfigError
from permfit.core.rng import FIT_TAG, PERMUTATION_TAG, RngPolicy, tag_code


@pytest.mark.parametrize("seed", [0, 1, 20240611, 2**63 + 17, 2**64 - 1])
def test_streams_are_reproducible(seed):
    first = RngPolicy(seed).stream(3, tag=FIT_TAG).random(16)
    second = RngPolicy(seed).stream(3, tag=FIT_TAG).random(16)
    assert np.array_equal(first, second)


def test_streams_do_not_depend_on_evaluation_order():
    policy = RngPolicy(11)
    forward = [policy.stream(b).integers(0, 2**32, size=4) for b in range(5)]
    backward = [policy.stream(b).integers(0, 2**32, size=4) for b in reversed(range(5))][::-1]
    for a, b in zip(forward, backward):
        assert np.array_equal(a, b)


def test_tags_and_indices_give_distinct_streams():
    policy = RngPolicy(11)
    base = policy.stream(0, tag=PERMUTATION_TAG).random(8)
    assert not np.array_equal(base, policy.stream(0, tag=FIT_TAG).random(8))
    assert not np.array_equal(base, policy.stream(1, tag=PERMUTATION_TAG).random(8))
    assert not np.array_equal(base, RngPolicy(12).stream(0, tag=PERMUTATION_TAG).random(8))


def test_derive_seed_is_stable_64_bit():
    policy = RngPolicy(5)
    seed = policy.derive_seed(2, 9, tag="data")
    assert seed == policy.derive_seed(2, 9, tag="data")
    assert 0 <= seed < 2**64
    assert seed != policy.derive_seed(2, 9, tag="test")


def test_tag_code_is_not_salted():
    assert tag_code("fit") == int.from_bytes(hashlib.sha256(b"fit").digest()[:4], "little")


def test_invalid_master_seed():
    with pytest.raises(ConfigError):
        RngPolicy(-1)
