"""End-to-end checks on the full-size synthetic model; run with ``pytest -m slow``."""
import math

import numpy as np
import pytest

from app.data.synthetic import (
    constant_rule,
    generate,
    generate_randomized,
    monte_carlo_value,
    monte_carlo_values,
    oracle_policy,
    sample_model,
)
from app.evaluation.estimator import expected_response
from app.evaluation.policy import BatchPrediction
from app.evaluation.tuning import tune, with_value
from app.models.ensemble import train_cts
from app.models.sma_baseline import train_sma
from app.schemas.dataset import TreatmentProbs
from app.schemas.model import ForestParams, SmaParams

pytestmark = pytest.mark.slow

PROBS = [0.4, 0.3, 0.2, 0.1]


@pytest.fixture(scope="module")
def model():
    return sample_model(2024)


def _oracle_as_policy(n_treatments):
    def policy(X):
        return BatchPrediction.from_scores(X[:, :n_treatments])
    return policy


def test_estimator_is_unbiased_and_covers(model):
    truth, truth_se = monte_carlo_value(model, oracle_policy(model), 1_000_000, np.random.default_rng(1))
    policy = _oracle_as_policy(model.n_treatments)
    probs = TreatmentProbs(probs=PROBS)
    rng = np.random.default_rng(2)

    estimates, covered = [], 0
    for _ in range(200):
        data = generate_randomized(model, 5000, PROBS, rng)
        report = expected_response(data, policy, probs, 0.95)
        estimates.append(report.estimate)
        covered += report.ci_low <= truth <= report.ci_high

    estimates = np.asarray(estimates)
    combined = math.sqrt(np.var(estimates, ddof=1) / estimates.shape[0] + truth_se ** 2)
    assert abs(estimates.mean() - truth) <= 3 * combined
    assert 0.91 <= covered / 200 <= 0.98


def test_oracle_gap_on_default_model(model):
    rules = {f"constant_{k}": constant_rule(k) for k in range(model.n_treatments)}
    rules["oracle"] = oracle_policy(model)
    values = monte_carlo_values(model, rules, 1_000_000, np.random.default_rng(3))
    best_constant = max(values[f"constant_{k}"][0] for k in range(model.n_treatments))
    assert values["oracle"][0] - best_constant == pytest.approx(0.6, abs=0.02)


def test_cts_learns_a_useful_policy(model):
    data = generate(model, 8000, np.random.default_rng(4))
    # leaf sizes picked by 5-fold held-out z-bar over the default grids, on smaller forests
    cts_size = tune(data, ForestParams(ntree=20, seed=5), np.random.default_rng(7), folds=5).best
    sma_size = tune(data, SmaParams(ntree=20, seed=5), np.random.default_rng(7), folds=5).best
    cts = train_cts(data, with_value(ForestParams(ntree=100, seed=5), cts_size))
    sma = train_sma(data, with_value(SmaParams(ntree=100, seed=5), sma_size))

    rules = {f"constant_{k}": constant_rule(k) for k in range(model.n_treatments)}
    rules["cts"] = lambda X: cts.predict(X).chosen
    rules["sma"] = lambda X: sma.predict(X).chosen
    values = monte_carlo_values(model, rules, 100_000, np.random.default_rng(6))

    best_constant = max(values[f"constant_{k}"][0] for k in range(model.n_treatments))
    assert values["cts"][0] - best_constant >= 0.25
    assert values["cts"][0] >= values["sma"][0]
