"""Elastic-net regularized logistic regression, no intercept.

Minimizes

    sum_i w_i * logloss(y_i, sigmoid(x_i . beta))
        + (1/c) * (l1_ratio * ||beta||_1 + (1 - l1_ratio)/2 * ||beta||_2^2)

with a stochastic-average proximal-gradient scheme: the smooth part
(weighted loss + L2) is handled by variance-reduced stochastic gradients,
the L1 part by soft-thresholding after each step.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

DEFAULT_C = 0.1
DEFAULT_L1_RATIO = 0.75
DEFAULT_TOL = 1e-6
DEFAULT_MAX_EPOCHS = 1000
DEFAULT_THRESHOLD = 0.62


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LogRegModel:
    weights: np.ndarray
    c: float = DEFAULT_C
    l1_ratio: float = DEFAULT_L1_RATIO
    class_weights: dict[int, float] | None = None
    threshold: float = DEFAULT_THRESHOLD
    intercept: float = 0.0  # fixed; the decision function has no bias term
    converged: bool = True
    n_epochs: int = 0

    def __post_init__(self):
        if not np.isfinite(self.weights).all():
            raise ValueError("weights must be finite")
        if self.intercept != 0.0:
            raise ValueError("intercept is fixed at zero")

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(x, dtype=float)) @ self.weights


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _sample_weights(y, class_weights):
    if class_weights is None:
        return np.ones(len(y))
    return np.array([class_weights[int(t)] for t in y], dtype=float)


def smooth_objective(beta, x, y, class_weights=None, c=DEFAULT_C, l1_ratio=DEFAULT_L1_RATIO):
    """Weighted log-loss plus the L2 half of the penalty (no L1 term)."""
    w = _sample_weights(y, class_weights)
    z = x @ beta
    # log(1 + e^z) - y*z, stable via logaddexp
    losses = np.logaddexp(0.0, z) - y * z
    return float(np.sum(w * losses) + (1.0 - l1_ratio) / (2.0 * c) * np.dot(beta, beta))


def smooth_gradient(beta, x, y, class_weights=None, c=DEFAULT_C, l1_ratio=DEFAULT_L1_RATIO):
    """Gradient of :func:`smooth_objective` with respect to beta."""
    w = _sample_weights(y, class_weights)
    z = x @ beta
    return x.T @ (w * (sigmoid(z) - y)) + (1.0 - l1_ratio) / c * beta


def objective(beta, x, y, class_weights=None, c=DEFAULT_C, l1_ratio=DEFAULT_L1_RATIO):
    """Full elastic-net objective including the L1 term."""
    return smooth_objective(beta, x, y, class_weights, c, l1_ratio) + (
        l1_ratio / c
    ) * float(np.abs(beta).sum())


def soft_threshold(v: np.ndarray, amount: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - amount, 0.0)


def train_logreg(
    x: np.ndarray,
    y: np.ndarray,
    c: float = DEFAULT_C,
    l1_ratio: float = DEFAULT_L1_RATIO,
    class_weights: dict[int, float] | None = None,
    tol: float = DEFAULT_TOL,
    max_epochs: int = DEFAULT_MAX_EPOCHS,
    seed: int = 0,
    threshold: float = DEFAULT_THRESHOLD,
) -> LogRegModel:
    """Fit by SAGA-style proximal stochastic gradient descent.

    Deterministic for a fixed seed: the per-epoch visit order comes from a
    seeded generator.  Stops when no coefficient moves more than ``tol``
    over an epoch.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("x must be (n, d) with matching labels")
    if len(x) < 2 or len(np.unique(y)) < 2:
        raise ValueError("training needs at least two samples of each class")
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    if not 0.0 <= l1_ratio <= 1.0:
        raise ValueError(f"l1_ratio must be in [0, 1], got {l1_ratio}")

    n, d = x.shape
    w = _sample_weights(y, class_weights)
    l2 = (1.0 - l1_ratio) / c
    l1 = l1_ratio / c

    # Lipschitz bound of the per-sample smooth gradients (loss scaled by n
    # so their average is the full gradient), for a safe SAGA step size.
    row_sq = np.sum(x * x, axis=1)
    lip = np.max(n * w * row_sq / 4.0) + l2
    step = 1.0 / (3.0 * lip)

    rng = np.random.Generator(np.random.PCG64(seed))
    beta = np.zeros(d)
    # Per-sample stored loss slope u_i = w_i * (sigmoid(x_i.beta) - y_i);
    # table_sum = sum_i u_i x_i is the full loss gradient at table state.
    u = w * (0.5 - y)
    table_sum = x.T @ u

    converged = False
    epoch = 0
    for epoch in range(1, max_epochs + 1):
        beta_start = beta.copy()
        order = rng.permutation(n)
        for i in order:
            u_new = w[i] * (float(sigmoid(x[i] @ beta)) - y[i])
            grad_est = n * (u_new - u[i]) * x[i] + table_sum + l2 * beta
            table_sum = table_sum + (u_new - u[i]) * x[i]
            u[i] = u_new
            beta = soft_threshold(beta - step * grad_est, step * l1)
        if np.max(np.abs(beta - beta_start)) < tol:
            converged = True
            break

    if not converged:
        delta = float(np.max(np.abs(beta - beta_start)))
        warnings.warn(
            f"SAGA stopped after {epoch} epochs with parameter change "
            f"{delta:.3e} (tol {tol:.0e})",
            ConvergenceWarning,
        )

    return LogRegModel(
        weights=beta,
        c=float(c),
        l1_ratio=float(l1_ratio),
        class_weights=None
        if class_weights is None
        else {int(k): float(v) for k, v in class_weights.items()},
        threshold=float(threshold),
        converged=converged,
        n_epochs=epoch,
    )
