"""Weighted L2-regularized logistic regression fitted by damped Newton."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import DimensionMismatchError, SingleClassError


@dataclass(frozen=True, eq=False)
class LogisticModel:
    """Coefficients are in the caller's feature space (standardization, if any,
    has been folded back in)."""

    coefficients: np.ndarray
    intercept: float
    l2_lambda: float
    converged: bool
    iterations: int
    loss_trace: tuple = ()

    @property
    def n_features(self) -> int:
        return len(self.coefficients)

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"model expects {self.n_features} features, got shape {X.shape}")
        return X @ self.coefficients + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision_function(X))

    def to_dict(self) -> dict:
        return {
            "type": "logistic",
            "coefficients": self.coefficients.tolist(),
            "intercept": self.intercept,
            "l2_lambda": self.l2_lambda,
            "converged": self.converged,
            "iterations": self.iterations,
            "final_loss": self.loss_trace[-1] if self.loss_trace else None,
        }

    @classmethod
    def from_dict(cls, data) -> "LogisticModel":
        final = data.get("final_loss")
        return cls(np.asarray(data["coefficients"], dtype=float), float(data["intercept"]),
                   float(data["l2_lambda"]), bool(data["converged"]), int(data["iterations"]),
                   () if final is None else (float(final),))


def weighted_loss(theta, Z, y, w, l2_lambda):
    """Objective and gradient in the augmented space ``Z = [X, 1]``.

    ``(sum_i w_i * logloss_i + l2_lambda / 2 * |beta|^2) / sum(w)``; the
    intercept (last entry of ``theta``) is not penalized.
    """
    z = Z @ theta
    total = w.sum()
    beta = theta[:-1]
    loss = (w * (np.logaddexp(0.0, z) - y * z)).sum() + 0.5 * l2_lambda * beta @ beta
    p = expit(z)
    grad = Z.T @ (w * (p - y))
    grad[:-1] += l2_lambda * beta
    return loss / total, grad / total


def logreg_fit(X, y, w=None, l2_lambda: float = 1.0, max_iter: int = 200,
               standardize=None, tol: float = 1e-10) -> LogisticModel:
    """Minimize the weighted negative log-likelihood plus ``l2_lambda/2 |beta|^2``.

    ``l2_lambda`` is absolute; the objective is divided by the total weight
    only for conditioning, so doubling all weights is equivalent to halving
    ``l2_lambda``. ``standardize`` is a boolean mask of columns to z-score with
    weighted training statistics before fitting; the penalty then acts on the
    standardized coefficients.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n, d = X.shape
    w = np.ones(n) if w is None else np.asarray(w, dtype=float).reshape(-1)
    if len(y) != n or len(w) != n:
        raise DimensionMismatchError("X, y and w must have the same number of rows")
    if n < 2 or np.unique(y).size < 2:
        raise SingleClassError("logistic regression needs both classes in the training data")
    if not np.isfinite(X).all():
        raise ValueError("features must be finite")
    if l2_lambda < 0:
        raise ValueError("l2_lambda must be non-negative")

    mean = np.zeros(d)
    scale = np.ones(d)
    if standardize is not None:
        mask = np.asarray(standardize, dtype=bool)
        if mask.any():
            wn = w / w.sum()
            mu = wn @ X[:, mask]
            sd = np.sqrt(wn @ (X[:, mask] - mu) ** 2)
            sd[sd == 0] = 1.0
            mean[mask], scale[mask] = mu, sd
    Z = np.hstack([(X - mean) / scale, np.ones((n, 1))])

    theta = np.zeros(d + 1)
    ridge = np.full(d + 1, l2_lambda)
    ridge[-1] = 0.0
    loss, grad = weighted_loss(theta, Z, y, w, l2_lambda)
    trace = [float(loss)]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if np.abs(grad).max() < tol:
            converged = True
            it -= 1
            break
        p = expit(Z @ theta)
        H = (Z.T * (w * p * (1 - p))) @ Z
        H[np.diag_indices_from(H)] += ridge + 1e-12 * w.sum()
        H /= w.sum()
        step = np.linalg.solve(H, -grad)
        slope = grad @ step
        if slope >= 0:  # not a descent direction; fall back to the gradient
            step, slope = -grad, -(grad @ grad)
        t = 1.0
        accepted = False
        for _ in range(50):
            cand = theta + t * step
            cand_loss, cand_grad = weighted_loss(cand, Z, y, w, l2_lambda)
            if cand_loss <= loss + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            converged = np.abs(grad).max() < 1e-6
            break
        improvement = loss - cand_loss
        theta, loss, grad = cand, cand_loss, cand_grad
        trace.append(float(loss))
        if improvement <= 1e-16 * max(1.0, abs(loss)) and np.abs(grad).max() < 1e-8:
            converged = True
            break
    else:
        converged = np.abs(grad).max() < tol

    beta = theta[:-1] / scale
    intercept = float(theta[-1] - beta @ mean)
    return LogisticModel(beta, intercept, float(l2_lambda), bool(converged), it, tuple(trace))
