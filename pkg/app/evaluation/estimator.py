"""Unbiased estimation of a policy's expected response from randomized-experiment data"""
from typing import Optional
import logging
import math

import numpy as np
from scipy.stats import norm

from app.config import settings
from app.data.dataset import Dataset, empirical_treatment_probs
from app.evaluation.policy import Policy
from app.exceptions import EvaluationError
from app.schemas.dataset import TreatmentProbs
from app.schemas.evaluation import EvaluationReport

logger = logging.getLogger(__name__)


def z_value(y: float, actual_t: int, predicted_t: int, probs: TreatmentProbs) -> float:
    """Transformed response: y / p_t when the policy agrees with the logged treatment, else 0."""
    if predicted_t != actual_t:
        return 0.0
    return y / probs.probs[actual_t]


def z_values(data: Dataset, assigned: np.ndarray, probs: TreatmentProbs) -> np.ndarray:
    """Vectorized z_value over all rows; same arithmetic as the scalar form."""
    p = np.asarray(probs.probs, dtype=np.float64)
    match = assigned == data.treatment
    z = np.zeros(data.n, dtype=np.float64)
    z[match] = data.response[match] / p[data.treatment[match]]
    return z


def resolve_inputs(data: Dataset, probs: Optional[TreatmentProbs],
                   conf_level: Optional[float]) -> tuple:
    if data.n == 0:
        raise EvaluationError("cannot evaluate a policy on an empty dataset")
    conf_level = settings.conf_level if conf_level is None else conf_level
    if not 0.0 < conf_level < 1.0:
        raise EvaluationError(f"confidence level must lie in (0, 1), got {conf_level}")
    if probs is None:
        probs = empirical_treatment_probs(data)
    if probs.n_treatments != data.n_treatments:
        raise EvaluationError(
            f"got {probs.n_treatments} treatment probabilities for {data.n_treatments} treatments"
        )
    return probs, conf_level


def assignment_report(data: Dataset,
                      assigned: np.ndarray,
                      probs: Optional[TreatmentProbs] = None,
                      conf_level: Optional[float] = None) -> EvaluationReport:
    """
    Evaluate a fixed per-row treatment assignment with z-bar.

    Args:
        data: Randomized-experiment rows
        assigned: Treatment the policy picks for each row
        probs: Assignment probabilities; defaults to the empirical frequencies
        conf_level: Confidence level of the normal-approximation interval

    Returns:
        EvaluationReport with estimate, standard error and interval
    """
    probs, conf_level = resolve_inputs(data, probs, conf_level)
    assigned = np.asarray(assigned, dtype=np.int64)
    if assigned.shape != (data.n,):
        raise EvaluationError(f"expected {data.n} assignments, got {assigned.shape[0]}")
    if np.any(assigned < 0) or np.any(assigned >= probs.n_treatments):
        raise EvaluationError("policy predicts a treatment without a positive assignment probability")

    z = z_values(data, assigned, probs)
    estimate = float(np.mean(z))
    std_error = float(np.std(z, ddof=1) / math.sqrt(data.n)) if data.n > 1 else 0.0
    q = float(norm.ppf((1.0 + conf_level) / 2.0))
    matched = np.bincount(data.treatment[assigned == data.treatment], minlength=data.n_treatments)
    return EvaluationReport(
        estimate=estimate,
        std_error=std_error,
        ci_low=estimate - q * std_error,
        ci_high=estimate + q * std_error,
        conf_level=conf_level,
        n=data.n,
        matched=matched.tolist(),
    )


def expected_response(data: Dataset,
                      policy: Policy,
                      probs: Optional[TreatmentProbs] = None,
                      conf_level: Optional[float] = None) -> EvaluationReport:
    """Estimate E[Y | T = h(X)] for the policy h on randomized-experiment data."""
    resolve_inputs(data, probs, conf_level)
    prediction = policy(data.features)
    report = assignment_report(data, prediction.chosen, probs, conf_level)
    logger.debug(f"z-bar {report.estimate:.6g} (se {report.std_error:.3g}) over {data.n} rows")
    return report
