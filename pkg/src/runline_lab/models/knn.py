from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from ..features import FeatureMatrix
from .base import ModelError, PredictionSet, ProbClassifier, Standardizer

# rows of the distance matrix evaluated at once (bounded by ~4M cells)
_CELLS = 4_000_000


def _neighbour_vote(dist: np.ndarray, y: np.ndarray, k: int) -> np.ndarray:
    """Home-win share among the k nearest columns of each row of ``dist``.

    Distance ties at the k-th place are resolved toward lower training indices.
    """
    kth = np.partition(dist, k - 1, axis=1)[:, k - 1 : k]
    closer = dist < kth
    need = k - closer.sum(axis=1, keepdims=True)
    at_kth = dist == kth
    take = at_kth & (np.cumsum(at_kth, axis=1) <= need)
    wins = (closer & y).sum(axis=1) + (take & y).sum(axis=1)
    return wins / k


class KNearestNeighbors(ProbClassifier):
    name = "knn"

    def __init__(self, k: int = 150, minkowski_p: float = 2.0, standardize: bool = True):
        super().__init__(k=k, minkowski_p=minkowski_p, standardize=standardize)
        if k < 1:
            raise ModelError("k must be at least 1")
        if minkowski_p < 1:
            raise ModelError("Minkowski p must be >= 1")

    def fit(self, train: FeatureMatrix) -> "KNearestNeighbors":
        if len(train) == 0:
            raise ModelError("knn: empty training set")
        k = self.hyperparameters["k"]
        if k > len(train):
            raise ModelError(f"knn: k={k} exceeds training size {len(train)}")
        self._scaler = Standardizer(train.values) if self.hyperparameters["standardize"] else None
        self._X = self._scaler(train.values) if self._scaler else train.values.astype(float)
        self._y = train.label.astype(bool)
        self.fitted = True
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        self._check_fitted()
        Q = self._scaler(X) if self._scaler else np.asarray(X, dtype=float)
        k = self.hyperparameters["k"]
        p = self.hyperparameters["minkowski_p"]
        out = np.empty(len(Q))
        chunk = max(1, _CELLS // len(self._X))
        for start in range(0, len(Q), chunk):
            block = Q[start : start + chunk]
            if p == 2:
                dist = cdist(block, self._X, "euclidean")
            elif p == 1:
                dist = cdist(block, self._X, "cityblock")
            else:
                dist = cdist(block, self._X, "minkowski", p=p)
            out[start : start + chunk] = _neighbour_vote(dist, self._y[None, :], k)
        return out


def knn_fit_predict(train: FeatureMatrix, test: FeatureMatrix, k: int = 150, minkowski_p: float = 2.0,
                    standardize: bool = True) -> PredictionSet:
    return KNearestNeighbors(k=k, minkowski_p=minkowski_p, standardize=standardize).fit(train).predict(test)
