"""Modified uplift curve: expected response as the treated share of the population grows"""
from pathlib import Path
from typing import Optional, Sequence, Union
import logging
import math

import numpy as np
import pandas as pd

from app.data.dataset import Dataset
from app.evaluation.estimator import resolve_inputs, assignment_report
from app.evaluation.policy import Policy
from app.exceptions import EvaluationError
from app.schemas.dataset import TreatmentProbs
from app.schemas.evaluation import CurvePoint, UpliftCurve

logger = logging.getLogger(__name__)

DEFAULT_GRID = [i / 20 for i in range(21)]

CURVE_COLUMNS = ["fraction", "estimate", "std_error", "ci_low", "ci_high"]


def _check_grid(grid: Sequence[float]) -> np.ndarray:
    g = np.asarray(grid, dtype=np.float64)
    if g.size == 0 or g[0] != 0.0 or g[-1] != 1.0:
        raise EvaluationError("curve grid must start at 0 and end at 1")
    if np.any(np.diff(g) <= 0):
        raise EvaluationError("curve grid must be strictly increasing")
    return g


def top_count(fraction: float, n: int) -> int:
    """ceil(fraction * n), ignoring float noise such as 0.3 * 10 = 3.0000000000000004."""
    return min(n, math.ceil(round(fraction * n, 9)))


def modified_uplift_curve(data: Dataset,
                          policy: Policy,
                          probs: Optional[TreatmentProbs] = None,
                          control: int = 0,
                          grid: Optional[Sequence[float]] = None,
                          conf_level: Optional[float] = None) -> UpliftCurve:
    """
    Rank subjects by predicted gain of their chosen treatment over control,
    send the top fraction to the chosen treatment and the rest to control,
    and estimate each mixed policy with z-bar on the full dataset.
    """
    g = _check_grid(DEFAULT_GRID if grid is None else grid)
    if not 0 <= control < data.n_treatments:
        raise EvaluationError(f"control label {control} outside 0..{data.n_treatments - 1}")
    probs, conf_level = resolve_inputs(data, probs, conf_level)

    prediction = policy(data.features)
    rows = np.arange(data.n)
    delta = prediction.per_treatment[rows, prediction.chosen] - prediction.per_treatment[:, control]
    # stable: equal gains keep original row order
    ranking = np.argsort(-delta, kind="stable")

    points = []
    for fraction in g:
        k = top_count(float(fraction), data.n)
        assigned = np.full(data.n, control, dtype=np.int64)
        top = ranking[:k]
        assigned[top] = prediction.chosen[top]
        report = assignment_report(data, assigned, probs, conf_level)
        points.append(CurvePoint(fraction=float(fraction), report=report))
    logger.info(f"Computed modified uplift curve with {len(points)} points")
    return UpliftCurve(points=points)


def curve_frame(curve: UpliftCurve) -> pd.DataFrame:
    return pd.DataFrame(
        [[p.fraction, p.report.estimate, p.report.std_error, p.report.ci_low, p.report.ci_high]
         for p in curve.points],
        columns=CURVE_COLUMNS,
    )


def write_curve_csv(curve: UpliftCurve, path: Union[str, Path]) -> None:
    curve_frame(curve).to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Wrote curve to {path}")
