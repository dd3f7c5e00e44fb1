"""CTS forest: bootstrapped CTS trees averaged into a treatment-selection policy"""
from dataclasses import dataclass, field
from typing import List, Optional
import logging

import numpy as np
from joblib import Parallel, delayed

from app.config import settings
from app.data.dataset import Dataset, stratified_bootstrap
from app.evaluation.policy import BatchPrediction
from app.exceptions import DatasetError, ParameterError
from app.models.base import resolve_mtry
from app.models.cts_tree import UpliftTree, check_features, grow_tree, sample_means
from app.schemas.dataset import CategoryMap, Schema
from app.schemas.evaluation import PolicyPrediction
from app.schemas.model import ForestParams

logger = logging.getLogger(__name__)


@dataclass
class Forest:
    trees: List[UpliftTree]
    params: ForestParams
    schema: Schema
    n_treatments: int
    categories: CategoryMap = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.schema.feature_columns)

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        """Mean of the trees' per-treatment estimates, summed in tree order."""
        X = check_features(X, self.n_features)
        total = np.zeros((X.shape[0], self.n_treatments))
        for tree in self.trees:
            total += tree.structure.predict(X)
        return total / len(self.trees)

    def predict(self, X: np.ndarray) -> BatchPrediction:
        return BatchPrediction.from_scores(self.predict_scores(X))

    __call__ = predict


def _train_tree(data: Dataset, params: ForestParams, b: int,
                seed: np.random.SeedSequence) -> UpliftTree:
    rng = np.random.default_rng(seed)
    sample = stratified_bootstrap(data, b, rng)
    return grow_tree(sample, params.tree, sample_means(sample), rng)


def train_cts(data: Dataset, params: ForestParams, n_jobs: Optional[int] = None) -> Forest:
    """
    Train a CTS forest.

    Args:
        data: Randomized-experiment rows with every treatment present
        params: Forest parameters
        n_jobs: joblib workers; the result does not depend on it

    Returns:
        Forest of ``params.ntree`` trees
    """
    counts = data.treatment_counts()
    if np.any(counts == 0):
        raise DatasetError(f"treatment {int(np.argmax(counts == 0))} absent from training data")
    b = data.n if params.b is None else params.b
    if b > data.n:
        raise ParameterError(f"bootstrap size b={b} exceeds the {data.n} training rows")
    resolve_mtry(params.tree.mtry, data.d)

    n_jobs = settings.n_jobs if n_jobs is None else n_jobs
    logger.info(f"Training CTS forest: {params.ntree} trees, b={b}, min_split={params.tree.min_split}, "
                f"n_reg={params.tree.n_reg}, n_jobs={n_jobs}")
    # one child stream per tree index, so trees do not depend on scheduling
    seeds = np.random.SeedSequence(params.seed).spawn(params.ntree)
    trees = Parallel(n_jobs=n_jobs)(delayed(_train_tree)(data, params, b, s) for s in seeds)
    logger.info(f"Trained {len(trees)} trees, mean size {np.mean([t.structure.n_nodes for t in trees]):.1f} nodes")
    return Forest(
        trees=list(trees),
        params=params,
        schema=data.schema,
        n_treatments=data.n_treatments,
        categories=data.categories,
    )


def forest_predict(forest: Forest, x: np.ndarray) -> PolicyPrediction:
    """Average tree predictions for one subject and pick the best treatment (lowest label on ties)."""
    return forest.predict(x).row(0)
