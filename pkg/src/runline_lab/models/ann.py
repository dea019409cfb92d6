from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from ..features import FeatureMatrix
from .base import ModelError, ProbClassifier, Standardizer, check_training, sigmoid


class NeuralNetwork(ProbClassifier):
    """Feed-forward network: tanh hidden layers, sigmoid output, logistic loss, mini-batch SGD."""

    name = "ann"

    def __init__(self, hidden_sizes: Sequence[int] = (64,), epochs: int = 30, learning_rate: float = 0.05,
                 batch_size: int = 128, l2: float = 0.0, seed: int = 0):
        hidden_sizes = tuple(int(h) for h in hidden_sizes)
        super().__init__(hidden_sizes=hidden_sizes, epochs=epochs, learning_rate=learning_rate,
                         batch_size=batch_size, l2=l2, seed=seed)
        if len(hidden_sizes) == 0:
            raise ModelError("ann needs at least one hidden layer; use logr for a linear model")
        if any(h < 1 for h in hidden_sizes):
            raise ModelError("hidden layer sizes must be positive")
        self.loss_history: List[float] = []

    def init_params(self, n_features: int) -> List[Tuple[np.ndarray, np.ndarray]]:
        rng = np.random.Generator(np.random.PCG64(self.hyperparameters["seed"]))
        sizes = [n_features, *self.hyperparameters["hidden_sizes"], 1]
        params = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params.append((rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out)))
        return params

    @staticmethod
    def forward(params, X: np.ndarray):
        acts = [X]
        a = X
        for W, b in params[:-1]:
            a = np.tanh(a @ W + b)
            acts.append(a)
        W, b = params[-1]
        z = (a @ W + b)[:, 0]
        return z, acts

    def loss(self, params, X: np.ndarray, y: np.ndarray) -> float:
        z, _ = self.forward(params, X)
        l2 = self.hyperparameters["l2"]
        reg = 0.5 * l2 * sum(float(np.sum(W * W)) for W, _ in params)
        return float(np.mean(np.logaddexp(0.0, z) - y * z)) + reg

    def gradients(self, params, X: np.ndarray, y: np.ndarray):
        """Backpropagated gradient of ``loss`` with respect to every (W, b)."""
        z, acts = self.forward(params, X)
        n = len(X)
        delta = ((sigmoid(z) - y) / n)[:, None]
        l2 = self.hyperparameters["l2"]
        grads = [None] * len(params)
        for layer in range(len(params) - 1, -1, -1):
            W, _ = params[layer]
            a_in = acts[layer]
            grads[layer] = (a_in.T @ delta + l2 * W, delta.sum(axis=0))
            if layer > 0:
                delta = (delta @ W.T) * (1.0 - a_in * a_in)
        return grads

    def fit(self, train: FeatureMatrix) -> "NeuralNetwork":
        check_training(train, self.name)
        hp = self.hyperparameters
        self._scaler = Standardizer(train.values)
        X = self._scaler(train.values)
        y = train.y
        params = self.init_params(X.shape[1])
        rng = np.random.Generator(np.random.PCG64(hp["seed"] + 1))
        lr, bs = hp["learning_rate"], max(1, int(hp["batch_size"]))
        self.loss_history = [self.loss(params, X, y)]
        for epoch in range(int(hp["epochs"])):
            order = rng.permutation(len(X))
            for s in range(0, len(X), bs):
                idx = order[s : s + bs]
                grads = self.gradients(params, X[idx], y[idx])
                params = [(W - lr * gW, b - lr * gb) for (W, b), (gW, gb) in zip(params, grads)]
            loss = self.loss(params, X, y)
            if not np.isfinite(loss):
                raise ModelError(f"ann: training diverged at epoch {epoch + 1} (learning_rate={lr})")
            self.loss_history.append(loss)
        self.params_ = params
        self.fitted = True
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        self._check_fitted()
        z, _ = self.forward(self.params_, self._scaler(np.asarray(X, dtype=float)))
        return sigmoid(z)


def gradient_check(model: NeuralNetwork, X: np.ndarray, y: np.ndarray, step: float = 1e-5) -> float:
    """Relative error ||analytic - numeric|| / (||analytic|| + ||numeric||) at initialisation.

    The numeric gradient uses central differences over every parameter.
    """
    params = model.init_params(X.shape[1])
    analytic = np.concatenate([np.concatenate([gW.ravel(), gb.ravel()]) for gW, gb in model.gradients(params, X, y)])
    numeric = []
    for li, (W, b) in enumerate(params):
        for arr in (W, b):
            flat = arr.reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + step
                up = model.loss(params, X, y)
                flat[k] = orig - step
                down = model.loss(params, X, y)
                flat[k] = orig
                numeric.append((up - down) / (2.0 * step))
    numeric = np.array(numeric)
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    return float(np.linalg.norm(analytic - numeric) / denom) if denom > 0 else 0.0


def ann_fit(train: FeatureMatrix, hidden_sizes: Sequence[int] = (64,), epochs: int = 30, learning_rate: float = 0.05,
            seed: int = 0) -> NeuralNetwork:
    return NeuralNetwork(hidden_sizes=hidden_sizes, epochs=epochs, learning_rate=learning_rate, seed=seed).fit(train)
