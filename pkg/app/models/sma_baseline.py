"""Separate Model Approach baseline: one regression forest per treatment"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence
import logging

import numpy as np
from joblib import Parallel, delayed

from app.config import settings
from app.data.dataset import Dataset
from app.evaluation.policy import BatchPrediction
from app.exceptions import DatasetError
from app.models.base import (
    CATEGORICAL_EQUALS,
    NUMERIC_THRESHOLD,
    NodeSummary,
    Split,
    TreeBuilderBase,
    TreeStructure,
    category_index,
    numeric_boundaries,
    resolve_mtry,
)
from app.models.cts_tree import check_features
from app.schemas.dataset import CategoryMap, Schema
from app.schemas.evaluation import PolicyPrediction
from app.schemas.model import SmaParams

logger = logging.getLogger(__name__)


class RegressionTreeBuilder(TreeBuilderBase):
    """
    Conventional regression tree: splits minimize the summed squared error of
    the two children, leaves predict the mean response.
    """

    def __init__(self, features: np.ndarray, categorical_mask: Sequence[bool], y: np.ndarray,
                 min_samples_leaf: int, mtry: int, rng: np.random.Generator,
                 max_depth: Optional[int] = None):
        super().__init__(features, categorical_mask, mtry, max_depth, rng)
        self.y = y
        self.min_samples_leaf = min_samples_leaf

    def _summary(self, rows: np.ndarray) -> NodeSummary:
        return np.array([np.mean(self.y[rows])]), np.array([rows.shape[0]])

    def root_summary(self, rows: np.ndarray) -> NodeSummary:
        return self._summary(rows)

    def child_summary(self, rows: np.ndarray, parent: NodeSummary) -> NodeSummary:
        return self._summary(rows)

    def is_terminal(self, rows: np.ndarray, summary: NodeSummary) -> bool:
        if rows.shape[0] < 2 * self.min_samples_leaf:
            return True
        y = self.y[rows]
        return bool(np.all(y == y[0]))

    def _feature_scores(self, rows: np.ndarray, feature: int):
        column = self.features[rows, feature]
        # centering keeps the running sums of squares well conditioned
        y = self.y[rows] - np.mean(self.y[rows])
        n = rows.shape[0]
        if self.categorical_mask[feature]:
            codes, index = category_index(column)
            n_left = np.bincount(index, minlength=codes.shape[0]).astype(np.float64)
            s_left = np.bincount(index, weights=y, minlength=codes.shape[0])
            q_left = np.bincount(index, weights=y * y, minlength=codes.shape[0])
            values = codes.astype(np.float64)
        else:
            order, positions, values = numeric_boundaries(column)
            ys = y[order]
            s_run, q_run = np.cumsum(ys), np.cumsum(ys * ys)
            n_left = (positions + 1).astype(np.float64)
            s_left, q_left = s_run[positions], q_run[positions]
        s_total, q_total = float(np.sum(y)), float(np.sum(y * y))
        n_right = n - n_left
        with np.errstate(divide="ignore", invalid="ignore"):
            sse = (q_left - s_left ** 2 / n_left) + ((q_total - q_left) - (s_total - s_left) ** 2 / n_right)
        admissible = (n_left >= self.min_samples_leaf) & (n_right >= self.min_samples_leaf)
        return values, np.where(admissible, sse, np.inf), q_total - s_total ** 2 / n

    def find_split(self, rows: np.ndarray, summary: NodeSummary,
                   candidate_features: np.ndarray) -> Optional[Split]:
        best: Optional[Split] = None
        best_sse = np.inf
        node_sse = None
        for feature in candidate_features:
            feature = int(feature)
            values, sse, node_sse = self._feature_scores(rows, feature)
            if values.shape[0] == 0:
                continue
            i = int(np.argmin(sse))
            if sse[i] < best_sse:
                kind = CATEGORICAL_EQUALS if self.categorical_mask[feature] else NUMERIC_THRESHOLD
                best, best_sse = Split(feature=feature, kind=kind, value=float(values[i])), float(sse[i])
        if best is None or not best_sse < node_sse * (1.0 - 1e-12):
            return None
        return best


def grow_regression_tree(features: np.ndarray, categorical_mask: Sequence[bool], y: np.ndarray,
                         min_samples_leaf: int, mtry: int, rng: np.random.Generator,
                         max_depth: Optional[int] = None) -> TreeStructure:
    builder = RegressionTreeBuilder(features, categorical_mask, y, min_samples_leaf, mtry, rng, max_depth)
    return builder.grow(np.arange(y.shape[0]))


@dataclass
class SmaModel:
    # forests[t] holds the regression trees fitted on rows with T=t
    forests: List[List[TreeStructure]]
    params: SmaParams
    schema: Schema
    n_treatments: int
    categories: CategoryMap = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.schema.feature_columns)

    def predict_treatment(self, t: int, X: np.ndarray) -> np.ndarray:
        X = check_features(X, self.n_features)
        total = np.zeros(X.shape[0])
        for tree in self.forests[t]:
            total += tree.predict(X)[:, 0]
        return total / len(self.forests[t])

    def predict(self, X: np.ndarray) -> BatchPrediction:
        X = check_features(X, self.n_features)
        scores = np.column_stack([self.predict_treatment(t, X) for t in range(self.n_treatments)])
        return BatchPrediction.from_scores(scores)

    __call__ = predict


def _train_tree(features: np.ndarray, categorical_mask: np.ndarray, y: np.ndarray,
                params: SmaParams, mtry: int, seed: np.random.SeedSequence) -> TreeStructure:
    rng = np.random.default_rng(seed)
    n = y.shape[0]
    rows = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
    return grow_regression_tree(features[rows], categorical_mask, y[rows],
                                params.min_samples_leaf, mtry, rng)


def train_sma(data: Dataset, params: SmaParams, n_jobs: Optional[int] = None) -> SmaModel:
    """
    Fit one bagged regression forest per treatment, each on that treatment's rows only.

    Args:
        data: Randomized-experiment rows with every treatment present
        params: Forest parameters shared by all treatments
        n_jobs: joblib workers; the result does not depend on it

    Returns:
        SmaModel with ``n_treatments`` forests
    """
    counts = data.treatment_counts()
    if np.any(counts == 0):
        raise DatasetError(f"treatment {int(np.argmax(counts == 0))} absent from training data")
    mtry = resolve_mtry(params.mtry, data.d)
    n_jobs = settings.n_jobs if n_jobs is None else n_jobs
    logger.info(f"Training SMA-RF: {data.n_treatments} forests of {params.ntree} trees, "
                f"min_samples_leaf={params.min_samples_leaf}, n_jobs={n_jobs}")

    mask = data.categorical_mask
    jobs = []
    for t, per_treatment in enumerate(np.random.SeedSequence(params.seed).spawn(data.n_treatments)):
        members = data.treatment == t
        X_t, y_t = data.features[members], data.response[members]
        jobs.extend(delayed(_train_tree)(X_t, mask, y_t, params, mtry, s)
                    for s in per_treatment.spawn(params.ntree))
    trees = Parallel(n_jobs=n_jobs)(jobs)
    forests = [list(trees[t * params.ntree:(t + 1) * params.ntree]) for t in range(data.n_treatments)]
    return SmaModel(
        forests=forests,
        params=params,
        schema=data.schema,
        n_treatments=data.n_treatments,
        categories=data.categories,
    )


def sma_predict(model: SmaModel, x: np.ndarray) -> PolicyPrediction:
    """Per-treatment forest predictions for one subject and the best treatment (lowest label on ties)."""
    return model.predict(x).row(0)
