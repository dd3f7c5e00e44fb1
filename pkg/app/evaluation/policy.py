"""Treatment-assignment policies in batch form"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from app.exceptions import ParameterError
from app.schemas.evaluation import PolicyPrediction


@dataclass(frozen=True)
class BatchPrediction:
    """Row-wise policy output: per-treatment predictions (n, K+1) and the chosen labels (n,)."""
    per_treatment: np.ndarray
    chosen: np.ndarray

    @classmethod
    def from_scores(cls, per_treatment: np.ndarray) -> "BatchPrediction":
        # argmax returns the first maximum, i.e. the smallest label on ties
        per_treatment = np.atleast_2d(per_treatment)
        return cls(per_treatment=per_treatment, chosen=np.argmax(per_treatment, axis=1))

    def __len__(self) -> int:
        return int(self.chosen.shape[0])

    def row(self, i: int) -> PolicyPrediction:
        return PolicyPrediction(per_treatment=self.per_treatment[i].tolist(), chosen=int(self.chosen[i]))


# A policy maps an (n, d) feature matrix to its predictions.
Policy = Callable[[np.ndarray], BatchPrediction]


def constant_policy(t: int, n_treatments: int) -> Policy:
    """Assign every subject to treatment ``t``."""
    if not 0 <= t < n_treatments:
        raise ParameterError(f"treatment {t} outside 0..{n_treatments - 1}")

    def policy(features: np.ndarray) -> BatchPrediction:
        scores = np.zeros((features.shape[0], n_treatments))
        scores[:, t] = 1.0
        return BatchPrediction.from_scores(scores)

    return policy
