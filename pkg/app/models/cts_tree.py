"""Single CTS tree: splits chosen to maximize the estimated gain in expected response"""
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np

from app.data.dataset import Dataset
from app.exceptions import DatasetError, ParameterError
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
from app.schemas.model import TreeParams

logger = logging.getLogger(__name__)


@dataclass
class UpliftTree:
    structure: TreeStructure
    params: TreeParams
    schema_fingerprint: str
    n_features: int

    @property
    def n_treatments(self) -> int:
        return int(self.structure.estimates.shape[1])


def child_estimate(parent_estimate: float, child_responses: np.ndarray,
                   min_split: int, n_reg: int) -> float:
    """
    Estimate of E[Y | child, T=t] from the child's rows of treatment t.

    Fewer than ``min_split`` rows inherit the parent's estimate; otherwise the
    sample sum is shrunk toward the parent by ``n_reg`` pseudo-observations.
    """
    count = child_responses.shape[0]
    if count < min_split:
        return parent_estimate
    return (np.sum(child_responses) + parent_estimate * n_reg) / (count + n_reg)


def node_estimates(data: Dataset, rows: np.ndarray, parent: np.ndarray,
                   params: TreeParams) -> np.ndarray:
    y = data.response[rows]
    t = data.treatment[rows]
    return np.array([
        child_estimate(float(parent[k]), y[t == k], params.min_split, params.n_reg)
        for k in range(data.n_treatments)
    ])


def _gain(parent_max: float, p_left, max_left, p_right, max_right):
    # written as deviations from the parent maximum so fully inherited children give exactly 0
    return p_left * (max_left - parent_max) + p_right * (max_right - parent_max)


def split_gain(data: Dataset, rows: np.ndarray, estimates: np.ndarray,
               split: Split, params: TreeParams) -> float:
    """
    Estimated increase in expected response from executing ``split`` at the node
    holding ``rows``, whose official estimates are ``estimates``.
    """
    left = split.goes_left(data.features[rows, split.feature])
    n_left = int(np.count_nonzero(left))
    n_right = rows.shape[0] - n_left
    if n_left == 0 or n_right == 0:
        raise ParameterError("split leaves one child empty")
    est_left = node_estimates(data, rows[left], estimates, params)
    est_right = node_estimates(data, rows[~left], estimates, params)
    n = rows.shape[0]
    return float(_gain(float(np.max(estimates)), n_left / n, float(np.max(est_left)),
                       n_right / n, float(np.max(est_right))))


def _vector_estimates(parent: np.ndarray, counts: np.ndarray, sums: np.ndarray,
                      params: TreeParams) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        own = (sums + parent * params.n_reg) / (counts + params.n_reg)
    return np.where(counts < params.min_split, parent, own)


def _screen_feature(data: Dataset, rows: np.ndarray, estimates: np.ndarray, feature: int,
                    params: TreeParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Gains of every candidate split on one feature using running sums.

    Returns:
        thresholds (or codes), approximate gains, and a flag marking candidates
        whose children inherit everything (their gain is exactly 0)
    """
    column = data.features[rows, feature]
    t = data.treatment[rows]
    y = data.response[rows]
    n, m = rows.shape[0], data.n_treatments
    empty = np.empty(0)

    if data.categorical_mask[feature]:
        codes, index = category_index(column)
        if codes.shape[0] < 2:
            return empty, empty, empty.astype(bool)
        counts_l = np.zeros((codes.shape[0], m))
        sums_l = np.zeros((codes.shape[0], m))
        np.add.at(counts_l, (index, t), 1.0)
        np.add.at(sums_l, (index, t), y)
        counts_r = counts_l.sum(axis=0) - counts_l
        sums_r = sums_l.sum(axis=0) - sums_l
        n_left = counts_l.sum(axis=1)
        values = codes.astype(np.float64)
    else:
        order, positions, values = numeric_boundaries(column)
        if positions.shape[0] == 0:
            return empty, empty, empty.astype(bool)
        onehot = np.zeros((n, m))
        onehot[np.arange(n), t[order]] = 1.0
        running_counts = np.cumsum(onehot, axis=0)
        running_sums = np.cumsum(onehot * y[order][:, None], axis=0)
        counts_l, sums_l = running_counts[positions], running_sums[positions]
        counts_r = running_counts[-1] - counts_l
        sums_r = running_sums[-1] - sums_l
        n_left = (positions + 1).astype(np.float64)

    est_l = _vector_estimates(estimates, counts_l, sums_l, params)
    est_r = _vector_estimates(estimates, counts_r, sums_r, params)
    gains = _gain(float(np.max(estimates)), n_left / n, est_l.max(axis=1),
                  (n - n_left) / n, est_r.max(axis=1))
    inherited = np.all(counts_l < params.min_split, axis=1) & np.all(counts_r < params.min_split, axis=1)
    return values, gains, inherited


def best_split(data: Dataset, rows: np.ndarray, estimates: np.ndarray,
               candidate_features: Sequence[int], params: TreeParams) -> Optional[Split]:
    """
    Split with the largest non-negative estimated gain among the candidate features.

    Candidates are screened with running sums; every candidate within a small
    tolerance of the best screened gain is re-scored with ``split_gain`` so the
    winner is decided on exact gains. Ties go to the lowest feature index, then
    the lowest threshold or code.
    """
    features, values, gains, inherited = [], [], [], []
    for feature in sorted(int(f) for f in candidate_features):
        v, g, inh = _screen_feature(data, rows, estimates, feature, params)
        features.append(np.full(v.shape[0], feature, dtype=np.int64))
        values.append(v)
        gains.append(g)
        inherited.append(inh)
    gains = np.concatenate(gains) if gains else np.empty(0)
    if gains.shape[0] == 0:
        return None
    features = np.concatenate(features)
    values = np.concatenate(values)
    inherited = np.concatenate(inherited)

    y = data.response[rows]
    tol = 1e-9 * (1.0 + float(np.max(np.abs(estimates))) + float(np.max(np.abs(y))))
    top = float(gains.max())
    if top < -tol:
        return None

    best: Optional[Split] = None
    best_gain = -np.inf
    # candidates are already in tie-break order: feature, then threshold or code
    for i in np.flatnonzero(gains >= top - tol):
        feature, value = int(features[i]), float(values[i])
        kind = CATEGORICAL_EQUALS if data.categorical_mask[feature] else NUMERIC_THRESHOLD
        split = Split(feature=feature, kind=kind, value=value)
        exact = 0.0 if inherited[i] else split_gain(data, rows, estimates, split, params)
        if exact >= 0.0 and exact > best_gain:
            best, best_gain = split, exact
    return best


class CTSTreeBuilder(TreeBuilderBase):
    """Grows one CTS tree on a (bootstrapped) training set."""

    def __init__(self, data: Dataset, params: TreeParams, root_estimates: np.ndarray,
                 rng: np.random.Generator):
        super().__init__(
            features=data.features,
            categorical_mask=data.categorical_mask,
            mtry=resolve_mtry(params.mtry, data.d),
            max_depth=params.max_depth,
            rng=rng,
        )
        self.data = data
        self.params = params
        self.root_estimates = np.asarray(root_estimates, dtype=np.float64)

    def _counts(self, rows: np.ndarray) -> np.ndarray:
        return np.bincount(self.data.treatment[rows], minlength=self.data.n_treatments)

    def root_summary(self, rows: np.ndarray) -> NodeSummary:
        return self.root_estimates, self._counts(rows)

    def child_summary(self, rows: np.ndarray, parent: NodeSummary) -> NodeSummary:
        return node_estimates(self.data, rows, parent[0], self.params), self._counts(rows)

    def is_terminal(self, rows: np.ndarray, summary: NodeSummary) -> bool:
        if np.all(summary[1] < self.params.min_split):
            return True
        y = self.data.response[rows]
        return bool(np.all(y == y[0]))

    def find_split(self, rows: np.ndarray, summary: NodeSummary,
                   candidate_features: np.ndarray) -> Optional[Split]:
        return best_split(self.data, rows, summary[0], candidate_features, self.params)


def sample_means(data: Dataset) -> np.ndarray:
    """Per-treatment sample means; every treatment must be present."""
    counts = data.treatment_counts()
    absent = np.flatnonzero(counts == 0)
    if absent.size:
        raise DatasetError(f"treatment {int(absent[0])} absent from the tree's training data")
    sums = np.bincount(data.treatment, weights=data.response, minlength=data.n_treatments)
    return sums / counts


def grow_tree(data: Dataset, params: TreeParams, root_estimates: Optional[np.ndarray],
              rng: np.random.Generator) -> UpliftTree:
    """
    Grow a CTS tree.

    Args:
        data: Training rows of this tree
        params: Tree parameters
        root_estimates: Root estimates; None means the per-treatment sample means of ``data``
        rng: Random stream for per-node feature sampling

    Returns:
        UpliftTree whose every node stores estimates for all treatments
    """
    if data.n == 0:
        raise DatasetError("cannot grow a tree on an empty dataset")
    if root_estimates is None:
        root_estimates = sample_means(data)
    builder = CTSTreeBuilder(data, params, root_estimates, rng)
    structure = builder.grow(np.arange(data.n))
    return UpliftTree(
        structure=structure,
        params=params,
        schema_fingerprint=data.schema.fingerprint(),
        n_features=data.d,
    )


def check_features(x: np.ndarray, n_features: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if X.shape[1] != n_features:
        raise DatasetError(f"schema mismatch: expected {n_features} features, got {X.shape[1]}")
    return X


def tree_predict(tree: UpliftTree, x: np.ndarray) -> List[float]:
    """Per-treatment estimates of the leaf reached by ``x``."""
    return tree.structure.predict(check_features(x, tree.n_features))[0].tolist()
