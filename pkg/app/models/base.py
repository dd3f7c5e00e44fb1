"""Split machinery shared by the CTS trees and the regression trees of the baseline"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
from pydantic import ValidationError

from app.exceptions import ModelFormatError, ParameterError
from app.schemas.model import NodeRecord, SplitKind

logger = logging.getLogger(__name__)

NUMERIC_THRESHOLD: SplitKind = "numeric_threshold"
CATEGORICAL_EQUALS: SplitKind = "categorical_equals"

# node kind codes in the flat arrays
LEAF, NUMERIC, CATEGORICAL = 0, 1, 2

# (estimates, counts) carried by every node
NodeSummary = Tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class Split:
    """
    Binary split of a node. Left is ``value <= threshold`` for numeric features
    and ``code == value`` for categorical ones; right is the complement.
    """
    feature: int
    kind: SplitKind
    value: float

    def goes_left(self, column: np.ndarray) -> np.ndarray:
        if self.kind == NUMERIC_THRESHOLD:
            return column <= self.value
        return column == self.value


def resolve_mtry(mtry: Optional[int], d: int) -> int:
    if mtry is None:
        return math.ceil(d / 2)
    if not 1 <= mtry <= d:
        raise ParameterError(f"mtry must lie in 1..{d}, got {mtry}")
    return mtry


def numeric_boundaries(column: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Candidate thresholds of a numeric column.

    Returns:
        order: stable sort order of the column
        positions: indices i in sorted order where a split falls between i and i+1
        thresholds: midpoints between consecutive distinct values
    """
    order = np.argsort(column, kind="stable")
    v = column[order]
    positions = np.flatnonzero(v[:-1] < v[1:])
    lo, hi = v[positions], v[positions + 1]
    mid = (lo + hi) / 2.0
    # rounding may land the midpoint on the upper value; the lower one splits identically
    thresholds = np.where(mid < hi, mid, lo)
    return order, positions, thresholds


def category_index(column: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Sorted distinct codes present and each row's position among them."""
    codes = np.unique(column)
    return codes, np.searchsorted(codes, column)


@dataclass
class TreeStructure:
    """Preorder node arrays of a grown tree; leaves have ``left == right == -1``."""
    feature: np.ndarray
    kind: np.ndarray
    value: np.ndarray
    left: np.ndarray
    right: np.ndarray
    estimates: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.kind.shape[0])

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.kind == LEAF))

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.kind[i] != LEAF:
                depths[self.left[i]] = depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def split_at(self, i: int) -> Optional[Split]:
        if self.kind[i] == LEAF:
            return None
        kind = NUMERIC_THRESHOLD if self.kind[i] == NUMERIC else CATEGORICAL_EQUALS
        return Split(feature=int(self.feature[i]), kind=kind, value=float(self.value[i]))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of X."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.kind[node] != LEAF)
        while active.size:
            at = node[active]
            x = X[active, self.feature[at]]
            left = np.where(self.kind[at] == NUMERIC, x <= self.value[at], x == self.value[at])
            node[active] = np.where(left, self.left[at], self.right[at])
            active = active[self.kind[node[active]] != LEAF]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.estimates[self.apply(X)]

    def to_record(self, feature_names: Sequence[str]) -> Dict[str, Any]:
        """Nested node record of the whole tree, assembled bottom-up."""
        records: List[Optional[Dict[str, Any]]] = [None] * self.n_nodes
        # preorder puts children after their parent, so a reverse sweep meets them first
        for i in range(self.n_nodes - 1, -1, -1):
            split = self.split_at(i)
            record: Dict[str, Any] = {
                "estimates": self.estimates[i].tolist(),
                "counts": self.counts[i].tolist(),
                "split": None,
                "left": None,
                "right": None,
            }
            if split is not None:
                record["split"] = {
                    "feature": split.feature,
                    "feature_name": feature_names[split.feature],
                    "kind": split.kind,
                    "value": split.value,
                }
                record["left"] = records[self.left[i]]
                record["right"] = records[self.right[i]]
            records[i] = record
        return records[0]

    @classmethod
    def from_record(cls, root: Dict[str, Any]) -> "TreeStructure":
        """Inverse of ``to_record``; every node is validated on its own."""
        builder: Optional[_StructureBuilder] = None
        stack: List[Tuple[Any, int, int]] = [(root, -1, 0)]
        while stack:
            raw, parent, side = stack.pop()
            if not isinstance(raw, dict):
                raise ModelFormatError("node record is not an object")
            try:
                node = NodeRecord.model_validate({k: raw.get(k) for k in ("estimates", "counts", "split")})
            except ValidationError as e:
                raise ModelFormatError(f"malformed node record: {e.error_count()} validation errors")
            left, right = raw.get("left"), raw.get("right")
            if (node.split is None) != (left is None and right is None) or (left is None) != (right is None):
                raise ModelFormatError("internal nodes need a split and both children; leaves have neither")
            if builder is None:
                builder = _StructureBuilder(len(node.estimates))
            elif len(node.estimates) != builder.width:
                raise ModelFormatError(f"node estimates have width {len(node.estimates)}, expected {builder.width}")
            split = None
            if node.split is not None:
                split = Split(node.split.feature, node.split.kind, node.split.value)
            i = builder.add(parent, side, split,
                            np.asarray(node.estimates, dtype=np.float64),
                            np.asarray(node.counts, dtype=np.int64))
            if split is not None:
                stack.append((right, i, 1))
                stack.append((left, i, 0))
        return builder.build()


class _StructureBuilder:
    """Accumulates nodes in preorder and patches child pointers."""

    def __init__(self, width: int):
        self.width = width
        self.feature: List[int] = []
        self.kind: List[int] = []
        self.value: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.estimates: List[np.ndarray] = []
        self.counts: List[np.ndarray] = []

    def add(self, parent: int, side: int, split: Optional[Split],
            estimates: np.ndarray, counts: np.ndarray) -> int:
        i = len(self.kind)
        if parent >= 0:
            (self.left if side == 0 else self.right)[parent] = i
        if split is None:
            self.feature.append(-1)
            self.kind.append(LEAF)
            self.value.append(0.0)
        else:
            self.feature.append(split.feature)
            self.kind.append(NUMERIC if split.kind == NUMERIC_THRESHOLD else CATEGORICAL)
            self.value.append(split.value)
        self.left.append(-1)
        self.right.append(-1)
        self.estimates.append(estimates)
        self.counts.append(counts)
        return i

    def build(self) -> TreeStructure:
        return TreeStructure(
            feature=np.asarray(self.feature, dtype=np.int64),
            kind=np.asarray(self.kind, dtype=np.int8),
            value=np.asarray(self.value, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            estimates=np.vstack(self.estimates).reshape(-1, self.width),
            counts=np.vstack(self.counts).reshape(-1, self.width),
        )


class TreeBuilderBase(ABC):
    """
    Base class for recursive-partitioning tree builders.

    Subclasses define how a node is summarized, when it is terminal and how
    its best split is found; this class owns the growth loop, per-node
    feature sampling and the flat output structure.
    """

    def __init__(self,
                 features: np.ndarray,
                 categorical_mask: Sequence[bool],
                 mtry: int,
                 max_depth: Optional[int],
                 rng: np.random.Generator):
        self.features = features
        self.categorical_mask = np.asarray(categorical_mask, dtype=bool)
        self.mtry = mtry
        self.max_depth = max_depth
        self.rng = rng

    @abstractmethod
    def root_summary(self, rows: np.ndarray) -> NodeSummary:
        """Estimates and counts of the root node."""

    @abstractmethod
    def child_summary(self, rows: np.ndarray, parent: NodeSummary) -> NodeSummary:
        """Estimates and counts of a child node given its parent's."""

    @abstractmethod
    def is_terminal(self, rows: np.ndarray, summary: NodeSummary) -> bool:
        """Algorithm-specific termination rules checked before any split search."""

    @abstractmethod
    def find_split(self, rows: np.ndarray, summary: NodeSummary,
                   candidate_features: np.ndarray) -> Optional[Split]:
        """Best admissible split among the candidate features, or None."""

    def draw_features(self) -> np.ndarray:
        d = self.features.shape[1]
        return np.sort(self.rng.choice(d, size=self.mtry, replace=False))

    def grow(self, rows: np.ndarray) -> TreeStructure:
        root = self.root_summary(rows)
        builder = _StructureBuilder(root[0].shape[0])
        # (rows, summary, depth, parent id, side); right pushed first so nodes come out in preorder
        stack = [(rows, root, 0, -1, 0)]
        while stack:
            node_rows, summary, depth, parent, side = stack.pop()
            split = None
            at_depth_limit = self.max_depth is not None and depth >= self.max_depth
            if not at_depth_limit and not self.is_terminal(node_rows, summary):
                split = self.find_split(node_rows, summary, self.draw_features())
            i = builder.add(parent, side, split, summary[0], summary[1])
            if split is None:
                continue
            left = split.goes_left(self.features[node_rows, split.feature])
            left_rows, right_rows = node_rows[left], node_rows[~left]
            stack.append((right_rows, self.child_summary(right_rows, summary), depth + 1, i, 1))
            stack.append((left_rows, self.child_summary(left_rows, summary), depth + 1, i, 0))
        structure = builder.build()
        logger.debug(f"Grew tree with {structure.n_nodes} nodes, {structure.n_leaves} leaves")
        return structure
