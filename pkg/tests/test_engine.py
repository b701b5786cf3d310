import numpy as np
import pytest

from permfit.core import engine
from permfit.core.engine import exhaustive_reference, run_permutation_test
from permfit.core.errors import DegenerateResponse, DimensionMismatch, DivergedTraining, TooLarge
from permfit.core.models import TestConfig, validate_dataset
from permfit.core.permutation import empirical_quantile, plan_for
from permfit.core.regressors import MLP, RegressorSpec
from permfit.core.statistics import R2, TSTAR, get_statistic, pesarin_statistic


def test_constant_response_is_degenerate(ols_spec, fast_config):
    data = validate_dataset(np.arange(6.0), np.full(6, 2.5))
    with pytest.raises(DegenerateResponse):
        run_permutation_test(data, ols_spec, R2, fast_config)


def test_model_free_statistic_needs_one_predictor(linear_data, ols_spec, fast_config):
    with pytest.raises(DimensionMismatch):
        run_permutation_test(linear_data, ols_spec, TSTAR, fast_config)


def test_strong_signal_rejects(linear_data, ols_spec, fast_config):
    outcome = run_permutation_test(linear_data, ols_spec, R2, fast_config)
    assert outcome.reject
    assert outcome.p_value == pytest.approx(1.0 / (fast_config.n_permutations + 1))
    assert outcome.n_reference == fast_config.n_permutations
    assert (outcome.n, outcome.d, outcome.model_kind) == (30, 2, "OLS")


def test_decision_is_recomputable_from_outcome(noise_data, ols_spec, fast_config):
    outcome = run_permutation_test(noise_data, ols_spec, R2, fast_config)
    reference = outcome.reference_array
    assert np.all(np.isfinite(reference))
    assert outcome.q == empirical_quantile(reference, 1.0 - fast_config.alpha)
    assert outcome.reject == (outcome.r0 > outcome.q)
    assert outcome.p_value == (1 + np.count_nonzero(reference >= outcome.r0)) / (len(reference) + 1)


def test_same_seed_same_outcome(noise_data, ols_spec, fast_config):
    assert run_permutation_test(noise_data, ols_spec, R2, fast_config) == \
        run_permutation_test(noise_data, ols_spec, R2, fast_config)


def test_thread_count_does_not_change_outcome(linear_data, small_mlp_spec):
    config = TestConfig(n_permutations=12, master_seed=21)
    sequential = run_permutation_test(linear_data, small_mlp_spec, R2, config, threads=1)
    parallel = run_permutation_test(linear_data, small_mlp_spec, R2, config, threads=4)
    assert sequential == parallel


def test_model_free_statistic_matches_standalone_permutation_test(ols_spec, rng):
    x = rng.standard_normal(25)
    y = 0.3 * x + rng.standard_normal(25)
    data = validate_dataset(x, y)
    config = TestConfig(n_permutations=100, master_seed=8)
    outcome = run_permutation_test(data, ols_spec, TSTAR, config)
    expected = [pesarin_statistic(x, y[order]) for order in plan_for(25, config).permutations]
    assert list(outcome.reference) == expected
    assert outcome.r0 == pesarin_statistic(x, y)
    assert outcome.model_kind == "model-free"


def test_exhaustive_reference_length(ols_spec):
    data = validate_dataset([1.0, 2.0, 4.0], [0.5, 3.0, 1.0])
    assert exhaustive_reference(data, ols_spec, R2).shape == (6,)


def test_exhaustive_reference_identical_rows(ols_spec):
    data = validate_dataset(np.ones((5, 1)), [0.5, 3.0, 1.0, 2.0, 7.0])
    values = exhaustive_reference(data, ols_spec, R2)
    assert np.allclose(values, values[0], atol=1e-12)


def test_exhaustive_reference_too_large(ols_spec, rng):
    data = validate_dataset(rng.standard_normal(9), rng.standard_normal(9))
    with pytest.raises(TooLarge):
        exhaustive_reference(data, ols_spec, R2)


def test_exhaustive_and_sampled_p_values_agree(ols_spec, rng):
    x = rng.standard_normal((6, 1))
    y = x[:, 0] + rng.standard_normal(6)
    data = validate_dataset(x, y)
    exhaustive = run_permutation_test(data, ols_spec, R2, TestConfig(exhaustive=True, master_seed=4))
    sampled = run_permutation_test(data, ols_spec, R2, TestConfig(n_permutations=5000, master_seed=4))
    assert exhaustive.n_reference == 720
    assert abs(exhaustive.p_value - sampled.p_value) <= 0.02


def test_exhaustive_mean_matches_sampled_mean(ols_spec, rng):
    data = validate_dataset(rng.standard_normal((5, 1)), rng.standard_normal(5))
    exhaustive = exhaustive_reference(data, ols_spec, R2)
    sampled = run_permutation_test(data, ols_spec, R2, TestConfig(n_permutations=20000, master_seed=6))
    reference = sampled.reference_array
    standard_error = reference.std(ddof=1) / np.sqrt(reference.size)
    assert abs(exhaustive.mean() - reference.mean()) <= 3 * standard_error


def test_risk_statistics_run_through_engine(linear_data, ols_spec, fast_config):
    for name in ("abs-risk", "huber-risk"):
        outcome = run_permutation_test(linear_data, ols_spec, get_statistic(name), fast_config)
        assert outcome.statistic_name == name
        assert outcome.r0 <= 0.0
        assert outcome.reject


def test_diverged_permuted_fits_score_negative_infinity(linear_data, ols_spec, fast_config, monkeypatch):
    original = linear_data.responses
    real_score = engine.score

    def flaky_score(data, spec, statistic, fit_rng):
        # diverge on every permuted sample that moved the first response
        if data.responses is not original and data.responses[0] != original[0]:
            raise DivergedTraining("loss became non-finite")
        return real_score(data, spec, statistic, fit_rng)

    monkeypatch.setattr(engine, "score", flaky_score)
    outcome = run_permutation_test(linear_data, ols_spec, R2, fast_config)
    reference = outcome.reference_array
    assert outcome.n_diverged == np.count_nonzero(np.isneginf(reference))
    assert outcome.n_diverged > 0
    assert outcome.p_value == (1 + np.count_nonzero(reference >= outcome.r0)) / (len(reference) + 1)


def test_divergence_on_original_pairing_aborts(linear_data, ols_spec, fast_config, monkeypatch):
    def always_diverge(data, spec, statistic, fit_rng):
        raise DivergedTraining("loss became non-finite")

    monkeypatch.setattr(engine, "score", always_diverge)
    with pytest.raises(DivergedTraining):
        run_permutation_test(linear_data, ols_spec, R2, fast_config)


def test_negative_r_squared_is_kept(noise_data, fast_config):
    barely_trained = RegressorSpec(MLP, mlp_layers=(3,), mlp_epochs=1, mlp_learning_rate=1e-6)
    outcome = run_permutation_test(noise_data, barely_trained, R2, fast_config)
    reference = outcome.reference_array
    assert np.all(np.isfinite(reference))
    assert reference.min() < 0.0
    assert outcome.n_diverged == 0
