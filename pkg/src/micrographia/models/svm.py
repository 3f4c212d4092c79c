"""Soft-margin RBF-kernel SVM trained by sequential minimal optimization.

The dual problem  min 1/2 a'Qa - sum(a)  s.t.  y'a = 0,  0 <= a_i <= C_i
(Q_ij = y_i y_j K_ij, C_i the per-class box bound) is solved by repeatedly
picking the maximal violating pair and solving the two-variable subproblem
analytically.  Probabilities come from a sigmoid fit over cross-validated
decision values.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

DEFAULT_C = 100.0
DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 10_000
DEFAULT_THRESHOLD = 0.65

_TAU = 1e-12


class ConvergenceWarning(UserWarning):
    pass


def rbf_kernel(x: np.ndarray, y: np.ndarray, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2); 1 at x == y, decaying to 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    d = x - y
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_kernel_matrix(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    """Pairwise kernel values, shape (len(a), len(b))."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


def scale_gamma(x: np.ndarray) -> float:
    """The common heuristic 1 / (n_features * var(x))."""
    x = np.asarray(x, dtype=float)
    var = float(x.var())
    if var <= 0:
        var = 1.0
    return 1.0 / (x.shape[1] * var)


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i per support vector
    bias: float
    gamma: float
    c: float
    class_weights: dict[int, float]
    platt_a: float
    platt_b: float
    threshold: float = DEFAULT_THRESHOLD
    converged: bool = True
    kkt_violation: float = 0.0

    def __post_init__(self):
        if len(self.support_vectors) < 1:
            raise ValueError("model needs at least one support vector")
        if len(self.dual_coef) != len(self.support_vectors):
            raise ValueError("dual coefficients must match support vectors")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        bound = self.c * max(self.class_weights.values()) + 1e-9
        if np.abs(self.dual_coef).max() > bound:
            raise ValueError("dual coefficients exceed the weighted box bound")

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        k = rbf_kernel_matrix(x, self.support_vectors, self.gamma)
        return k @ self.dual_coef + self.bias


def balanced_class_weights(labels) -> dict[int, float]:
    """weight(class) = n_total / (2 * n_class); upweights the minority."""
    y = np.asarray(labels)
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise ValueError("both classes must be present to balance weights")
    n = len(y)
    return {int(c): n / (2.0 * int(k)) for c, k in zip(classes, counts)}


def _smo(K, y_signed, box, tol, max_iter):
    """Maximal-violating-pair SMO; returns (alpha, bias, violation, iters)."""
    n = len(y_signed)
    alpha = np.zeros(n)
    # G tracks the dual gradient Q @ alpha - 1 incrementally.
    grad = -np.ones(n)
    q_sign = y_signed[:, None] * y_signed[None, :]
    it = 0
    violation = np.inf
    while it < max_iter:
        y_grad = y_signed * grad
        up = ((y_signed > 0) & (alpha < box - _TAU)) | ((y_signed < 0) & (alpha > _TAU))
        low = ((y_signed < 0) & (alpha < box - _TAU)) | ((y_signed > 0) & (alpha > _TAU))
        if not up.any() or not low.any():
            violation = 0.0
            break
        neg_ygrad = -y_grad
        i = int(np.flatnonzero(up)[np.argmax(neg_ygrad[up])])
        j = int(np.flatnonzero(low)[np.argmin(neg_ygrad[low])])
        violation = neg_ygrad[i] - neg_ygrad[j]
        if violation < tol:
            break

        old_i, old_j = alpha[i], alpha[j]
        ci, cj = box[i], box[j]
        if y_signed[i] != y_signed[j]:
            quad = max(K[i, i] + K[j, j] - 2.0 * K[i, j], _TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > ci - cj:
                if alpha[i] > ci:
                    alpha[i] = ci
                    alpha[j] = ci - diff
            else:
                if alpha[j] > cj:
                    alpha[j] = cj
                    alpha[i] = cj + diff
        else:
            quad = max(K[i, i] + K[j, j] - 2.0 * K[i, j], _TAU)
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > ci:
                if alpha[i] > ci:
                    alpha[i] = ci
                    alpha[j] = total - ci
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > cj:
                if alpha[j] > cj:
                    alpha[j] = cj
                    alpha[i] = total - cj
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total

        d_i = alpha[i] - old_i
        d_j = alpha[j] - old_j
        grad += q_sign[:, i] * K[:, i] * d_i + q_sign[:, j] * K[:, j] * d_j
        it += 1

    bias = _compute_bias(alpha, grad, y_signed, box)
    return alpha, bias, float(max(violation, 0.0)), it


def _compute_bias(alpha, grad, y_signed, box):
    free = (alpha > _TAU) & (alpha < box - _TAU)
    neg_ygrad = -y_signed * grad
    if free.any():
        return float(neg_ygrad[free].mean())
    up = ((y_signed > 0) & (alpha < box - _TAU)) | ((y_signed < 0) & (alpha > _TAU))
    low = ((y_signed < 0) & (alpha < box - _TAU)) | ((y_signed > 0) & (alpha > _TAU))
    hi = neg_ygrad[up].max() if up.any() else 0.0
    lo = neg_ygrad[low].min() if low.any() else 0.0
    return float((hi + lo) / 2.0)


def fit_platt_scaling(decision_values, labels, max_iter: int = 100):
    """Sigmoid calibration by prior-smoothed maximum likelihood (Newton
    descent with backtracking).  Returns (a, b) such that
    p(pd | f) = 1 / (1 + exp(-(a * f + b)))."""
    f = np.asarray(decision_values, dtype=float)
    y = np.asarray(labels)
    n_pos = int((y == 1).sum())
    n_neg = len(y) - n_pos
    # Smoothed targets regularize the fit against separable decision values.
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    a, b = 0.0, np.log((n_neg + 1.0) / (n_pos + 1.0))
    eps = 1e-12

    def objective(a_, b_):
        z = a_ * f + b_
        # t*z + log(1 + exp(-z)) computed stably for either sign of z
        return float(np.sum(np.where(z >= 0, t * z + np.log1p(np.exp(-z)), (t - 1) * z + np.log1p(np.exp(z)))))

    best = objective(a, b)
    for _ in range(max_iter):
        z = a * f + b
        # p = P(pd | f) under the current fit, computed stably either side of 0
        p = np.where(z >= 0, np.exp(-z) / (1 + np.exp(-z)), 1 / (1 + np.exp(z)))
        d1 = t - p
        g_a = float(np.sum(d1 * f))
        g_b = float(np.sum(d1))
        if abs(g_a) < 1e-5 and abs(g_b) < 1e-5:
            break
        w = (1 - p) * p
        h11 = float(np.sum(w * f * f)) + eps
        h22 = float(np.sum(w)) + eps
        h12 = float(np.sum(w * f))
        det = h11 * h22 - h12 * h12
        if det <= 0:
            break
        step_a = -(h22 * g_a - h12 * g_b) / det
        step_b = -(-h12 * g_a + h11 * g_b) / det
        stepsize = 1.0
        improved = False
        while stepsize >= 1e-10:
            cand = objective(a + stepsize * step_a, b + stepsize * step_b)
            if cand < best - 1e-12 * abs(best):
                a += stepsize * step_a
                b += stepsize * step_b
                best = cand
                improved = True
                break
            stepsize *= 0.5
        if not improved:
            break
    # Flip sign so callers evaluate sigmoid(a*f + b) directly.
    return -a, -b


def _stratified_folds(labels, n_folds, seed):
    y = np.asarray(labels)
    rng = np.random.Generator(np.random.PCG64(seed))
    folds = [[] for _ in range(n_folds)]
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        for pos, i in enumerate(idx):
            folds[pos % n_folds].append(int(i))
    return [np.array(sorted(f), dtype=int) for f in folds]


def train_svm(
    x: np.ndarray,
    y: np.ndarray,
    c: float = DEFAULT_C,
    gamma: float | None = None,
    class_weights: dict[int, float] | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    threshold: float = DEFAULT_THRESHOLD,
    calibration_folds: int = 3,
    seed: int = 0,
) -> SvmModel:
    """Fit the dual on (x, y) with per-class box bounds c * weight, then
    calibrate probabilities on held-out decision values."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=int)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("x must be (n, d) with matching labels")
    if len(x) < 2 or len(np.unique(y)) < 2:
        raise ValueError("training needs at least two samples of each class")
    if gamma is None:
        gamma = scale_gamma(x)
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    weights = class_weights or {0: 1.0, 1: 1.0}
    y_signed = np.where(y == 1, 1.0, -1.0)
    box = np.array([c * weights[int(t)] for t in y], dtype=float)

    K = rbf_kernel_matrix(x, x, gamma)
    alpha, bias, violation, iters = _smo(K, y_signed, box, tol, max_iter)
    if violation >= tol:
        warnings.warn(
            f"SMO stopped after {iters} iterations with KKT violation "
            f"{violation:.3e} (tol {tol:.0e})",
            ConvergenceWarning,
        )

    # Calibration decision values: cross-validated where the class counts
    # allow it, otherwise the training set's own decision values.
    class_counts = np.bincount(y)
    if calibration_folds >= 2 and min(class_counts[class_counts > 0]) >= calibration_folds:
        cal_f = np.zeros(len(y))
        for fold in _stratified_folds(y, calibration_folds, seed):
            mask = np.ones(len(y), dtype=bool)
            mask[fold] = False
            if len(np.unique(y[mask])) < 2:
                mask[:] = True  # degenerate fold; fall back to full fit
            a_f, b_f, _, _ = _smo(
                K[np.ix_(mask, mask)], y_signed[mask], box[mask], tol, max_iter
            )
            cal_f[fold] = (
                rbf_kernel_matrix(x[fold], x[mask], gamma) @ (a_f * y_signed[mask]) + b_f
            )
        platt_a, platt_b = fit_platt_scaling(cal_f, y)
    else:
        train_f = K @ (alpha * y_signed) + bias
        platt_a, platt_b = fit_platt_scaling(train_f, y)

    keep = alpha > _TAU
    if not keep.any():
        # All multipliers at zero (degenerate data); keep one so the model
        # stays well-formed with a constant decision function.
        keep[0] = True
    return SvmModel(
        support_vectors=x[keep].copy(),
        dual_coef=(alpha * y_signed)[keep],
        bias=bias,
        gamma=float(gamma),
        c=float(c),
        class_weights={int(k): float(v) for k, v in weights.items()},
        platt_a=float(platt_a),
        platt_b=float(platt_b),
        threshold=float(threshold),
        converged=bool(violation < tol),
        kkt_violation=violation,
    )
