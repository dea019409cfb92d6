"""Gradient-boosted regression trees on the logistic loss (second-order, L2-regularised leaves)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..features import FeatureMatrix
from .base import ModelError, ProbClassifier, check_training, sigmoid


def _log_loss(F: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, F) - y * F))


def candidate_thresholds(x: np.ndarray, max_bins: int) -> np.ndarray:
    """Split points for one feature: every distinct value when few, else quantiles."""
    uniq = np.unique(x)
    if len(uniq) <= max_bins:
        return uniq
    qs = np.quantile(x, np.linspace(0.0, 1.0, max_bins + 1)[1:], method="lower")
    return np.unique(qs)


def split_gain(gl, hl, gr, hr, l2):
    return 0.5 * (gl * gl / (hl + l2) + gr * gr / (hr + l2) - (gl + gr) ** 2 / (hl + hr + l2))


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            internal = self.feature[node] >= 0
            if not internal.any():
                return node
            idx = np.flatnonzero(internal)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    @property
    def depth(self) -> int:
        def d(i):
            return 0 if self.feature[i] < 0 else 1 + max(d(self.left[i]), d(self.right[i]))

        return d(0)


class GradientBoostedTrees(ProbClassifier):
    """Additive ensemble of depth-limited trees fit to logistic-loss gradients and hessians.

    Leaf weight is ``-G / (H + l2_leaf)`` scaled by ``learning_rate``. If a round would
    raise the training loss its leaves are halved until it does not (up to 30 times,
    after which the round contributes nothing), so the per-round loss never increases.
    """

    name = "gbdt"

    def __init__(self, rounds: int = 200, depth: int = 4, learning_rate: float = 0.1, l2_leaf: float = 1.0,
                 min_child_weight: float = 1.0, max_bins: int = 256):
        super().__init__(rounds=rounds, depth=depth, learning_rate=learning_rate, l2_leaf=l2_leaf,
                         min_child_weight=min_child_weight, max_bins=max_bins)
        if rounds < 1 or depth < 1:
            raise ModelError("rounds and depth must be >= 1")
        if learning_rate < 0:
            raise ModelError("learning_rate must be non-negative")

    def fit(self, train: FeatureMatrix) -> "GradientBoostedTrees":
        check_training(train, self.name)
        hp = self.hyperparameters
        X = train.values
        y = train.y
        n, d = X.shape
        self.thresholds_ = [candidate_thresholds(X[:, j], hp["max_bins"]) for j in range(d)]
        codes = np.column_stack(
            [np.searchsorted(self.thresholds_[j], X[:, j], side="left") for j in range(d)]
        ).astype(np.int64)
        n_bins = max(len(t) for t in self.thresholds_)
        prior = float(y.mean())
        self.base_score_ = float(np.log(prior / (1.0 - prior)))
        F = np.full(n, self.base_score_)
        self.trees_: List[Tree] = []
        self.loss_history = [_log_loss(F, y)]
        for _ in range(hp["rounds"]):
            p = sigmoid(F)
            g = p - y
            h = p * (1.0 - p)
            tree, leaf_of_row = self._grow(codes, g, h, n_bins)
            step = tree.value[leaf_of_row]
            loss = _log_loss(F + step, y)
            halvings = 0
            while loss > self.loss_history[-1] and halvings < 30:
                tree.value *= 0.5
                step = tree.value[leaf_of_row]
                loss = _log_loss(F + step, y)
                halvings += 1
            if loss > self.loss_history[-1]:
                tree.value[:] = 0.0
                step = tree.value[leaf_of_row]
                loss = self.loss_history[-1]
            F = F + step
            self.trees_.append(tree)
            self.loss_history.append(loss)
        self.fitted = True
        return self

    def _grow(self, codes: np.ndarray, g: np.ndarray, h: np.ndarray, n_bins: int) -> Tuple[Tree, np.ndarray]:
        hp = self.hyperparameters
        l2, lr, mcw = hp["l2_leaf"], hp["learning_rate"], hp["min_child_weight"]
        n, d = codes.shape
        feature, threshold, left, right, value = [-1], [0.0], [-1], [-1], [0.0]
        node_of_row = np.zeros(n, dtype=np.int64)
        frontier = [0]
        flat = codes + (np.arange(d, dtype=np.int64) * n_bins)[None, :]
        for _level in range(hp["depth"]):
            if not frontier:
                break
            slot = np.full(len(feature), -1, dtype=np.int64)
            slot[frontier] = np.arange(len(frontier))
            row_slot = slot[node_of_row]
            active = row_slot >= 0
            size = len(frontier) * d * n_bins
            index = (row_slot[active][:, None] * (d * n_bins) + flat[active]).ravel()
            G = np.bincount(index, weights=np.repeat(g[active], d), minlength=size).reshape(len(frontier), d, n_bins)
            H = np.bincount(index, weights=np.repeat(h[active], d), minlength=size).reshape(len(frontier), d, n_bins)
            GL, HL = G.cumsum(axis=2), H.cumsum(axis=2)
            GR, HR = GL[:, :, -1:] - GL, HL[:, :, -1:] - HL
            gain = split_gain(GL, HL, GR, HR, l2)
            # hessians are strictly positive, so H > 0 means a non-empty child
            valid = (HL > 0) & (HR > 0) & (HL >= mcw) & (HR >= mcw)
            gain = np.where(valid, gain, -np.inf)
            next_frontier = []
            for s, node in enumerate(frontier):
                flat_best = int(np.argmax(gain[s]))
                j, b = divmod(flat_best, n_bins)
                if not np.isfinite(gain[s, j, b]) or gain[s, j, b] <= 0:
                    continue
                feature[node] = j
                threshold[node] = float(self.thresholds_[j][b])
                for _ in range(2):
                    feature.append(-1)
                    threshold.append(0.0)
                    left.append(-1)
                    right.append(-1)
                    value.append(0.0)
                left[node], right[node] = len(feature) - 2, len(feature) - 1
                rows = node_of_row == node
                go_left = rows & (codes[:, j] <= b)
                node_of_row[go_left] = left[node]
                node_of_row[rows & ~go_left] = right[node]
                next_frontier += [left[node], right[node]]
            frontier = next_frontier
        Gn = np.bincount(node_of_row, weights=g, minlength=len(feature))
        Hn = np.bincount(node_of_row, weights=h, minlength=len(feature))
        leaf = np.array(feature) < 0
        vals = np.where(leaf, -lr * Gn / (Hn + l2), 0.0)
        tree = Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right), vals)
        return tree, node_of_row

    def raw_score(self, X: np.ndarray, rounds: Optional[int] = None) -> np.ndarray:
        self._check_fitted()
        F = np.full(len(X), self.base_score_)
        for tree in self.trees_[: rounds if rounds is not None else len(self.trees_)]:
            F += tree.predict(X)
        return F

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.raw_score(np.asarray(X, dtype=float)))


def gbdt_fit(train: FeatureMatrix, rounds: int = 200, depth: int = 4, learning_rate: float = 0.1,
             l2_leaf: float = 1.0) -> GradientBoostedTrees:
    return GradientBoostedTrees(rounds=rounds, depth=depth, learning_rate=learning_rate, l2_leaf=l2_leaf).fit(train)
