from __future__ import annotations

from typing import Any, Dict

import numpy as np

from ..features import FeatureMatrix
from ..predictions import PredictionError, PredictionSet


class ModelError(PredictionError):
    pass


class NotFittedError(ModelError):
    pass


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Standardizer:
    """Column z-scoring with training-set statistics; constant columns pass through centred."""

    def __init__(self, X: np.ndarray):
        self.mean = X.mean(axis=0)
        sd = X.std(axis=0)
        self.scale = np.where(sd > 0, sd, 1.0)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


class ProbClassifier:
    """Common surface: ``fit(FeatureMatrix)`` then ``predict(FeatureMatrix) -> PredictionSet``."""

    name = "model"

    def __init__(self, **hyperparameters: Any):
        self.hyperparameters: Dict[str, Any] = dict(hyperparameters)
        self.fitted = False

    def fit(self, train: FeatureMatrix) -> "ProbClassifier":
        raise NotImplementedError

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_fitted(self) -> None:
        if not self.fitted:
            raise NotFittedError(f"{self.name} must be fitted before predicting")

    def predict(self, fm: FeatureMatrix) -> PredictionSet:
        self._check_fitted()
        return PredictionSet.from_matrix(self.name, fm, self.predict_proba(fm.values))

    def __repr__(self) -> str:
        params = ", ".join(f"{k}={v!r}" for k, v in self.hyperparameters.items())
        return f"{type(self).__name__}({params})"


def check_training(train: FeatureMatrix, name: str, min_rows: int = 2) -> None:
    if len(train) < min_rows:
        raise ModelError(f"{name}: need at least {min_rows} training rows, got {len(train)}")
    if train.label.all() or not train.label.any():
        raise ModelError(f"{name}: training labels contain a single class")
    if not np.all(np.isfinite(train.values)):
        raise ModelError(f"{name}: non-finite training features")
