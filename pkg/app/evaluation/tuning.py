"""Grid search of the leaf-size parameter by cross-validated z-bar"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import pandas as pd

from app.data.dataset import Dataset, kfold_partition, stratified_split
from app.evaluation.estimator import expected_response
from app.exceptions import ParameterError
from app.models.ensemble import train_cts
from app.models.sma_baseline import train_sma
from app.schemas.model import ForestParams, SmaParams
from app.schemas.run_config import DEFAULT_CTS_GRID, DEFAULT_SMA_GRID

logger = logging.getLogger(__name__)

Params = Union[ForestParams, SmaParams]

SCORE_COLUMNS = ["value", "fold", "score"]


@dataclass
class TuneResult:
    best: int
    # one row per (value, fold)
    scores: pd.DataFrame

    def mean_scores(self) -> pd.Series:
        return self.scores.groupby("value", sort=True)["score"].mean()


def tuned_parameter(params: Params) -> str:
    return "min_split" if isinstance(params, ForestParams) else "min_samples_leaf"


def default_grid(params: Params) -> List[int]:
    return list(DEFAULT_CTS_GRID if isinstance(params, ForestParams) else DEFAULT_SMA_GRID)


def with_value(params: Params, value: int) -> Params:
    """Copy of ``params`` with the tuned parameter set to ``value``."""
    if isinstance(params, ForestParams):
        return params.model_copy(update={"tree": params.tree.model_copy(update={"min_split": value})})
    return params.model_copy(update={"min_samples_leaf": value})


def fit(data: Dataset, params: Params, n_jobs: Optional[int] = None):
    if isinstance(params, ForestParams):
        return train_cts(data, params, n_jobs)
    return train_sma(data, params, n_jobs)


def usable_grid(grid: Sequence[int], train_size: int) -> List[int]:
    """Sorted distinct grid values not larger than the training size; the smallest always stays."""
    values = sorted(set(int(v) for v in grid))
    if not values:
        raise ParameterError("tuning grid must not be empty")
    if values[0] < 1:
        raise ParameterError(f"grid values must be at least 1, got {values[0]}")
    kept = [v for v in values if v <= train_size] or values[:1]
    dropped = [v for v in values if v not in kept]
    if dropped:
        logger.warning(f"Omitting grid values {dropped} larger than the training size {train_size}")
    return kept


def tune(data: Dataset,
         params: Params,
         rng: np.random.Generator,
         grid: Optional[Sequence[int]] = None,
         folds: int = 5,
         validation_fraction: Optional[float] = None,
         n_jobs: Optional[int] = None) -> TuneResult:
    """
    Pick the grid value with the highest mean held-out z-bar.

    Folds are stratified by treatment. With ``validation_fraction`` set, a
    single stratified train/validate split replaces k-fold cross-validation.
    Ties go to the smaller value.
    """
    if validation_fraction is not None:
        train, held = stratified_split(data, [1.0 - validation_fraction, validation_fraction], rng)
        pairs: List[Tuple[Dataset, Dataset]] = [(train, held)]
    else:
        pairs = kfold_partition(data, folds, rng)
    values = usable_grid(default_grid(params) if grid is None else grid,
                         min(train.n for train, _ in pairs))
    name = tuned_parameter(params)
    logger.info(f"Tuning {name} over {values} with {len(pairs)} fold(s)")

    rows = []
    for value in values:
        candidate = with_value(params, value)
        for k, (train, held) in enumerate(pairs):
            model = fit(train, candidate, n_jobs)
            score = expected_response(held, model).estimate
            rows.append((value, k, score))
            logger.debug(f"{name}={value} fold {k}: z-bar {score:.6g}")
    scores = pd.DataFrame(rows, columns=SCORE_COLUMNS)

    means = scores.groupby("value", sort=True)["score"].mean()
    # idxmax returns the first maximum, i.e. the smallest value on ties
    best = int(means.idxmax())
    logger.info(f"Selected {name}={best} (mean z-bar {means[best]:.6g})")
    return TuneResult(best=best, scores=scores)
