"""RBF-kernel support vector machine trained by SMO, with Platt-scaled probabilities."""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from ..features import FeatureMatrix
from .base import ModelError, ProbClassifier, Standardizer, check_training

TAU = 1e-12


class ConvergenceError(ModelError):
    pass


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def smo_solve(K: np.ndarray, y: np.ndarray, c: float, tol: float = 1e-3,
              max_iter: Optional[int] = None) -> Tuple[np.ndarray, float, int]:
    """Solve the soft-margin dual with second-order working-set selection.

    ``y`` is in {-1, +1}. Returns (alpha, rho, iterations); the decision function is
    ``sum_i alpha_i y_i K(x_i, x) - rho``. Stops once the maximal KKT violation
    ``m(alpha) - M(alpha)`` drops below ``tol``.
    """
    n = len(y)
    if max_iter is None:
        max_iter = max(100_000, 100 * n)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a'Qa - e'a
    diag = np.diag(K).copy()
    pos = y > 0
    for it in range(max_iter):
        minus_yg = -y * grad
        up = np.where(pos, alpha < c, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c)
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(minus_yg[up])])
        g_max = minus_yg[i]
        g_min = minus_yg[low].min()
        if g_max - g_min < tol:
            break
        b = g_max - minus_yg
        cand = low & (b > 0)
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 0, a, TAU)
        score = np.full(n, np.inf)
        score[cand] = -(b[cand] ** 2) / a[cand]
        j = int(np.argmin(score))

        yi, yj = y[i], y[j]
        quad = max(diag[i] + diag[j] - 2.0 * K[i, j], TAU)
        old_i, old_j = alpha[i], alpha[j]
        total = yi * old_i + yj * old_j
        new_i = old_i + yi * b[j] / quad
        new_i = min(max(new_i, 0.0), c)
        new_j = yj * (total - yi * new_i)
        new_j = min(max(new_j, 0.0), c)
        new_i = yi * (total - yj * new_j)
        alpha[i], alpha[j] = new_i, new_j
        d_i, d_j = new_i - old_i, new_j - old_j
        grad += y * (K[:, i] * (yi * d_i) + K[:, j] * (yj * d_j))
    else:
        minus_yg = -y * grad
        up = np.where(pos, alpha < c, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < c)
        residual = minus_yg[up].max() - minus_yg[low].min()
        raise ConvergenceError(f"SMO did not converge in {max_iter} iterations (KKT residual {residual:.3g})")

    yg = y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        rho = float(yg[free].mean())
    else:
        at_upper = alpha >= c
        ub_side = np.where(at_upper, ~pos, pos)
        ub = yg[ub_side].min() if ub_side.any() else np.inf
        lb = yg[~ub_side].max() if (~ub_side).any() else -np.inf
        rho = float(0.5 * (ub + lb)) if np.isfinite(ub) and np.isfinite(lb) else 0.0
    return alpha, rho, it


def platt_fit(f: np.ndarray, y: np.ndarray, max_iter: int = 100) -> Tuple[float, float]:
    """Fit P(y=1|f) = 1 / (1 + exp(A f + B)) by Newton's method with Platt's smoothed targets."""
    prior1 = float(np.sum(y > 0))
    prior0 = float(len(y) - prior1)
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(y > 0, hi, lo)
    A, B = 0.0, float(np.log((prior0 + 1.0) / (prior1 + 1.0)))
    sigma = 1e-12

    def objective(A, B):
        z = f * A + B
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-z)), (t - 1) * z + np.log1p(np.exp(z)))))

    fval = objective(A, B)
    for _ in range(max_iter):
        z = f * A + B
        p = np.where(z >= 0, np.exp(-z) / (1 + np.exp(-z)), 1 / (1 + np.exp(z)))
        q = 1 - p
        d2 = p * q
        h11 = sigma + float(np.sum(f * f * d2))
        h22 = sigma + float(np.sum(d2))
        h21 = float(np.sum(f * d2))
        d1 = t - p
        g1 = float(np.sum(f * d1))
        g2 = float(np.sum(d1))
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2.0
        else:
            break
    return A, B


def stratified_subsample(label: np.ndarray, cap: int, rng: np.random.Generator) -> np.ndarray:
    n = len(label)
    if n <= cap:
        return np.arange(n)
    idx = []
    for cls in (False, True):
        members = np.flatnonzero(label == cls)
        take = int(round(cap * len(members) / n))
        idx.append(rng.choice(members, size=min(take, len(members)), replace=False))
    return np.sort(np.concatenate(idx))


class SVM(ProbClassifier):
    name = "svm"

    def __init__(self, c: float = 1.0, gamma: Optional[float] = None, subsample_cap: int = 5000,
                 tol: float = 1e-3, calibration_folds: int = 3, seed: int = 0, max_iter: Optional[int] = None):
        super().__init__(c=c, gamma=gamma, subsample_cap=subsample_cap, tol=tol,
                         calibration_folds=calibration_folds, seed=seed, max_iter=max_iter)
        if c <= 0:
            raise ModelError("c must be positive")

    def _solve(self, Z: np.ndarray, y: np.ndarray):
        hp = self.hyperparameters
        K = rbf_kernel(Z, Z, self.gamma_)
        alpha, rho, iters = smo_solve(K, y, hp["c"], tol=hp["tol"], max_iter=hp["max_iter"])
        return alpha, rho, iters, K

    def fit(self, train: FeatureMatrix) -> "SVM":
        check_training(train, self.name)
        hp = self.hyperparameters
        rng = np.random.Generator(np.random.PCG64(hp["seed"]))
        rows = stratified_subsample(train.label, hp["subsample_cap"], rng)
        X = train.values[rows]
        lab = train.label[rows]
        y = np.where(lab, 1.0, -1.0)
        self._scaler = Standardizer(X)
        Z = self._scaler(X)
        self.gamma_ = hp["gamma"] if hp["gamma"] is not None else 1.0 / Z.shape[1]

        # out-of-fold decision values feed the Platt sigmoid
        folds = max(2, int(hp["calibration_folds"]))
        fold_id = np.empty(len(y), dtype=int)
        for cls in (False, True):
            members = np.flatnonzero(lab == cls)
            members = rng.permutation(members)
            fold_id[members] = np.arange(len(members)) % folds
        oof = np.empty(len(y))
        for k in range(folds):
            tr, va = fold_id != k, fold_id == k
            if len(np.unique(y[tr])) < 2:
                raise ModelError("svm: a calibration fold lacks one class")
            a, rho, _, _ = self._solve(Z[tr], y[tr])
            sv = a > 0
            oof[va] = rbf_kernel(Z[va], Z[tr][sv], self.gamma_) @ (a[sv] * y[tr][sv]) - rho
        self.platt_ = platt_fit(oof, y)

        alpha, rho, iters, _ = self._solve(Z, y)
        self._train_Z = Z
        self._train_y = y
        self.alpha_ = alpha
        self.rho_ = rho
        self.iterations_ = iters
        sv = alpha > 0
        self.support_vectors_ = Z[sv]
        self.dual_coef_ = alpha[sv] * y[sv]
        self.fitted = True
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        self._check_fitted()
        return self.decision_function_scaled(self._scaler(np.asarray(X, dtype=float)))

    def decision_function_scaled(self, Z: np.ndarray) -> np.ndarray:
        out = np.empty(len(Z))
        step = max(1, 2_000_000 // max(1, len(self.support_vectors_)))
        for s in range(0, len(Z), step):
            out[s : s + step] = rbf_kernel(Z[s : s + step], self.support_vectors_, self.gamma_) @ self.dual_coef_
        return out - self.rho_

    def probability(self, decision: np.ndarray) -> np.ndarray:
        A, B = self.platt_
        z = A * np.asarray(decision, dtype=float) + B
        return np.where(z >= 0, np.exp(-z) / (1 + np.exp(-z)), 1 / (1 + np.exp(z)))

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.probability(self.decision_function(X))

    def kkt_violation(self) -> float:
        """Largest violation of the dual optimality conditions on the fitted subsample."""
        self._check_fitted()
        y, a, c = self._train_y, self.alpha_, self.hyperparameters["c"]
        margin = y * self.decision_function_scaled(self._train_Z)
        zero = a <= 0
        bound = a >= c
        free = ~zero & ~bound
        viol = np.zeros(len(y))
        viol[zero] = np.maximum(0.0, 1.0 - margin[zero])
        viol[bound] = np.maximum(0.0, margin[bound] - 1.0)
        viol[free] = np.abs(margin[free] - 1.0)
        return float(viol.max())


def svm_fit(train: FeatureMatrix, c: float = 1.0, gamma: Optional[float] = None, subsample_cap: int = 5000,
            seed: int = 0) -> SVM:
    return SVM(c=c, gamma=gamma, subsample_cap=subsample_cap, seed=seed).fit(train)
