import math

import numpy as np
import pytest

from app.data.synthetic import (
    SyntheticModel,
    calibration_stream,
    constant_rule,
    f_values,
    generate,
    generate_randomized,
    load_model_constants,
    mean_abs_f,
    monte_carlo_value,
    monte_carlo_values,
    oracle_mean,
    oracle_policy,
    sample_model,
    save_model_constants,
)
from app.exceptions import ConfigError, ParameterError


@pytest.fixture(scope="module")
def small_model():
    return sample_model(3, d=6, m=4, calibration_draws=20_000)


def test_defaults():
    model = sample_model(0, d=4, m=2, calibration_draws=1000)
    assert model.alpha == 0.4
    assert model.sigma == 0.8
    assert model.n_treatments == 4
    assert np.all((model.b >= 0.05) & (model.b <= 0.25))
    assert np.all((model.c >= 0) & (model.c <= 10))


def test_full_size_model_is_rescaled_to_mean_abs_eight():
    model = sample_model(11)
    assert (model.d, model.m) == (50, 50)
    assert 7.9 <= mean_abs_f(model, 100_000, calibration_stream(11)) <= 8.1


def test_f_is_a_mixture_of_exponentials():
    model = SyntheticModel(a=np.array([2.0, -1.0]), b=np.full((2, 4), 0.1), c=np.zeros((2, 4)))
    x = np.array([[1.0, 2.0, 3.0, 4.0]])
    assert f_values(model, x)[0] == pytest.approx(2.0 * math.exp(-1.0) - math.exp(-1.0))


def test_invalid_constants_rejected():
    with pytest.raises(ParameterError):
        SyntheticModel(a=np.ones(1), b=np.zeros((1, 4)), c=np.zeros((1, 4)))
    with pytest.raises(ParameterError):
        SyntheticModel(a=np.ones(1), b=np.ones((1, 4)), c=np.zeros((1, 4)), alpha=-0.1)


def test_generate_has_equal_arms(small_model):
    data = generate(small_model, 50, np.random.default_rng(0))
    assert data.n == 200
    assert data.treatment_counts().tolist() == [50, 50, 50, 50]
    assert data.treatment_names == ["1", "2", "3", "4"]
    assert data.schema.feature_names == [f"x{j}" for j in range(1, 7)]
    assert np.all((data.features >= 0) & (data.features <= 10))


def test_noiseless_response_is_f(small_model):
    quiet = SyntheticModel(a=small_model.a, b=small_model.b, c=small_model.c, alpha=0.0, sigma=0.0)
    data = generate(quiet, 25, np.random.default_rng(1))
    assert np.array_equal(data.response, f_values(quiet, data.features))


def test_treatment_effect_is_bounded(small_model):
    model = SyntheticModel(a=small_model.a, b=small_model.b, c=small_model.c, alpha=0.4, sigma=0.0)
    data = generate(model, 100, np.random.default_rng(2))
    effect = data.response - f_values(model, data.features)
    coordinate = data.features[np.arange(data.n), data.treatment]
    assert np.all(effect >= -1e-12)
    assert np.all(effect <= 0.4 * coordinate + 1e-12)


def test_arms_have_equal_mean_response(small_model):
    data = generate(small_model, 20_000, np.random.default_rng(4))
    means, ses = [], []
    for t in range(4):
        y = data.response[data.treatment == t]
        means.append(y.mean())
        ses.append(y.std(ddof=1) / math.sqrt(y.shape[0]))
    for s in range(4):
        for t in range(s + 1, 4):
            assert abs(means[s] - means[t]) <= 4 * math.hypot(ses[s], ses[t])


def test_randomized_assignment(small_model):
    data = generate_randomized(small_model, 4000, [0.4, 0.3, 0.2, 0.1], np.random.default_rng(5))
    assert data.n == 4000
    shares = data.treatment_counts() / data.n
    assert np.allclose(shares, [0.4, 0.3, 0.2, 0.1], atol=0.03)
    with pytest.raises(ParameterError):
        generate_randomized(small_model, 10, [0.5, 0.5], np.random.default_rng(0))


def test_oracle_mean(small_model):
    x = np.random.default_rng(6).uniform(0, 10, size=6)
    x[0] = 0.0
    assert oracle_mean(small_model, x, 1) == f_values(small_model, x[None, :])[0]
    x[1] = 10.0
    assert oracle_mean(small_model, x, 2) == f_values(small_model, x[None, :])[0] + 2.0
    with pytest.raises(ParameterError):
        oracle_mean(small_model, x, 0)
    with pytest.raises(ParameterError):
        oracle_mean(small_model, x, 5)


def test_oracle_policy_picks_the_best_treatment(small_model):
    X = np.random.default_rng(7).uniform(0, 10, size=(20, 6))
    chosen = oracle_policy(small_model)(X)
    for x, label in zip(X, chosen):
        values = [oracle_mean(small_model, x, t) for t in range(1, 5)]
        assert label == int(np.argmax(values))
        assert label == int(np.argmax(x[:4]))


def test_single_draw_has_zero_standard_error(small_model):
    value, std_error = monte_carlo_value(small_model, constant_rule(2), 1, np.random.default_rng(5))
    x = np.random.default_rng(5).spawn(1)[0].uniform(0, 10, size=(1, 6))[0]
    assert std_error == 0.0
    assert value == pytest.approx(oracle_mean(small_model, x, 3), rel=1e-12)


def test_monte_carlo_does_not_depend_on_workers(small_model):
    rule = oracle_policy(small_model)
    a = monte_carlo_value(small_model, rule, 150_000, np.random.default_rng(8), n_jobs=1)
    b = monte_carlo_value(small_model, rule, 150_000, np.random.default_rng(8), n_jobs=2)
    assert a == b


def test_constant_policy_value(small_model):
    value, std_error = monte_carlo_value(small_model, constant_rule(0), 200_000, np.random.default_rng(9))
    X = np.random.default_rng(10).uniform(0, 10, size=(200_000, 6))
    f = f_values(small_model, X)
    expected = f.mean() + 0.4 * 5 / 2
    assert abs(value - expected) <= 4 * math.hypot(std_error, f.std(ddof=1) / math.sqrt(f.shape[0]))


def test_oracle_gap_over_constant_policies(small_model):
    rules = {f"constant_{t}": constant_rule(t) for t in range(4)}
    rules["oracle"] = oracle_policy(small_model)
    values = monte_carlo_values(small_model, rules, 200_000, np.random.default_rng(11))
    best_constant = max(values[f"constant_{t}"][0] for t in range(4))
    assert values["oracle"][0] - best_constant == pytest.approx(0.6, abs=0.02)


def test_constants_round_trip(tmp_path, small_model):
    path = tmp_path / "constants.json"
    save_model_constants(small_model, path)
    loaded = load_model_constants(path)
    for name in ("a", "b", "c"):
        assert np.array_equal(getattr(loaded, name), getattr(small_model, name))
    assert (loaded.alpha, loaded.sigma, loaded.n_treatments, loaded.seed) == (0.4, 0.8, 4, 3)


def test_malformed_constants(tmp_path):
    path = tmp_path / "constants.json"
    path.write_text('{"d": 2}')
    with pytest.raises(ConfigError):
        load_model_constants(path)
