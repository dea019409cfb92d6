from __future__ import annotations

from typing import List, Optional

import numpy as np

from ..features import FeatureMatrix
from .base import ModelError, ProbClassifier, Standardizer, check_training, sigmoid


def _logistic_loss(z: np.ndarray, y: np.ndarray) -> float:
    # mean of log(1 + e^z) - y z, evaluated stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


class LogisticRegression(ProbClassifier):
    """Logistic regression fit by full-batch gradient descent from zero weights.

    ``learning_rate=None`` uses 1/L, L being the Lipschitz constant of the loss
    gradient, which makes the training loss non-increasing epoch to epoch.
    """

    name = "logr"

    def __init__(self, learning_rate: Optional[float] = None, epochs: int = 2000, l2: float = 0.0,
                 standardize: bool = True, tol: float = 1e-10):
        super().__init__(learning_rate=learning_rate, epochs=epochs, l2=l2, standardize=standardize, tol=tol)
        if epochs < 0:
            raise ModelError("epochs must be non-negative")
        self.loss_history: List[float] = []
        self._scaler: Optional[Standardizer] = None

    def _design(self, X: np.ndarray) -> np.ndarray:
        Z = self._scaler(X) if self._scaler is not None else X
        return np.column_stack([np.ones(len(Z)), Z])

    def fit(self, train: FeatureMatrix) -> "LogisticRegression":
        check_training(train, self.name)
        hp = self.hyperparameters
        X, y = train.values, train.y
        self._scaler = Standardizer(X) if hp["standardize"] else None
        A = self._design(X)
        n, d = A.shape
        l2 = float(hp["l2"])
        lam_max = float(np.linalg.eigvalsh(A.T @ A / n)[-1])
        lr = hp["learning_rate"] if hp["learning_rate"] is not None else 1.0 / (0.25 * lam_max + l2)
        penalty = np.ones(d)
        penalty[0] = 0.0  # intercept is not shrunk
        w = np.zeros(d)
        z = A @ w
        self.loss_history = [_logistic_loss(z, y)]
        for _ in range(int(hp["epochs"])):
            grad = A.T @ (sigmoid(z) - y) / n + l2 * penalty * w
            w = w - lr * grad
            z = A @ w
            loss = _logistic_loss(z, y) + 0.5 * l2 * float(np.sum(penalty * w * w))
            if not np.isfinite(loss):
                raise ModelError(f"{self.name}: loss diverged (learning_rate={lr})")
            self.loss_history.append(loss)
            if abs(self.loss_history[-2] - loss) < hp["tol"] and np.max(np.abs(grad)) < 1e-7:
                break
        self.weights = w
        self.learning_rate_used = lr
        self.fitted = True
        return self

    @property
    def coef_(self) -> np.ndarray:
        """Slopes in the original (unstandardised) feature units."""
        self._check_fitted()
        w = self.weights[1:]
        return w / self._scaler.scale if self._scaler is not None else w.copy()

    @property
    def intercept_(self) -> float:
        self._check_fitted()
        if self._scaler is None:
            return float(self.weights[0])
        return float(self.weights[0] - np.sum(self.weights[1:] * self._scaler.mean / self._scaler.scale))

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        self._check_fitted()
        return self._design(X) @ self.weights

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision_function(X))


def logr_fit(train: FeatureMatrix, learning_rate: Optional[float] = None, epochs: int = 2000, l2: float = 0.0,
             standardize: bool = True) -> LogisticRegression:
    return LogisticRegression(learning_rate=learning_rate, epochs=epochs, l2=l2, standardize=standardize).fit(train)
