import numpy as np
import pytest

from permfit.core.models import TestConfig, validate_dataset
from permfit.core.regressors import MLP, OLS, RegressorSpec


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the Monte Carlo calibration and power experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def linear_data(rng):
    """n=30, two predictors, strong linear signal."""
    X = rng.standard_normal((30, 2))
    y = 1.5 + 2.0 * X[:, 0] - 0.5 * X[:, 1] + 0.1 * rng.standard_normal(30)
    return validate_dataset(X, y)


@pytest.fixture
def noise_data(rng):
    X = rng.standard_normal((30, 1))
    y = rng.uniform(0.0, 1.0, size=30)
    return validate_dataset(X, y)


@pytest.fixture
def ols_spec():
    return RegressorSpec(OLS)


@pytest.fixture
def small_mlp_spec():
    return RegressorSpec(MLP, mlp_layers=(8, 8), mlp_epochs=50, mlp_learning_rate=0.05)


@pytest.fixture
def fast_config():
    return TestConfig(alpha=0.05, n_permutations=50, master_seed=7)
