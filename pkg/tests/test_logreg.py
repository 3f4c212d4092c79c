"""Elastic-net logistic regression: gradient checks against finite
differences, objective against a slow full-batch proximal oracle, and the
regularization-path behaviors that pin the penalty conventions."""

import numpy as np
import pytest

from micrographia.models import logreg as lr
from micrographia.models import balanced_class_weights, predict_proba, train_logreg


def ista_oracle(x, y, c, l1_ratio, class_weights=None, max_iter=300_000, tol=1e-13):
    """Independent full-batch proximal gradient descent, run to a much
    tighter tolerance than the trainer under test."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if class_weights is None:
        w = np.ones(len(y))
    else:
        w = np.array([class_weights[int(t)] for t in y])
    l2 = (1.0 - l1_ratio) / c
    l1 = l1_ratio / c
    lip = np.linalg.norm((x.T * w) @ x, 2) / 4.0 + l2
    step = 1.0 / lip
    beta = np.zeros(x.shape[1])
    for _ in range(max_iter):
        z = x @ beta
        sig = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        grad = x.T @ (w * (sig - y)) + l2 * beta
        new = beta - step * grad
        new = np.sign(new) * np.maximum(np.abs(new) - step * l1, 0.0)
        if np.max(np.abs(new - beta)) < tol:
            return new
        beta = new
    return beta


def toy_data(n=50, d=6, seed=0, informative=True):
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.normal(size=(n, d))
    if informative:
        true_w = rng.normal(size=d)
        logits = x @ true_w
        y = (logits + rng.normal(scale=0.5, size=n) > 0).astype(int)
    else:
        y = rng.integers(0, 2, size=n)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    return x, y


# -- gradient ------------------------------------------------------------------


def test_smooth_gradient_matches_finite_differences():
    x, y = toy_data(n=40, d=5, seed=1)
    weights = balanced_class_weights(y)
    rng = np.random.Generator(np.random.PCG64(2))
    eps = 1e-6
    for _ in range(20):
        beta = rng.normal(scale=0.8, size=5)
        grad = lr.smooth_gradient(beta, x, y, weights, c=0.1, l1_ratio=0.75)
        for j in range(5):
            step = np.zeros(5)
            step[j] = eps
            hi = lr.smooth_objective(beta + step, x, y, weights, c=0.1, l1_ratio=0.75)
            lo = lr.smooth_objective(beta - step, x, y, weights, c=0.1, l1_ratio=0.75)
            fd = (hi - lo) / (2 * eps)
            denom = max(abs(fd), 1e-8)
            assert abs(grad[j] - fd) / denom < 1e-5


# -- objective against the oracle -------------------------------------------------


def test_objective_matches_full_batch_oracle():
    x, y = toy_data(n=50, d=6, seed=3)
    weights = balanced_class_weights(y)
    model = train_logreg(
        x, y, c=0.1, l1_ratio=0.75, class_weights=weights, tol=1e-10, max_epochs=5000, seed=0
    )
    ref = ista_oracle(x, y, c=0.1, l1_ratio=0.75, class_weights=weights)
    got = lr.objective(model.weights, x, y, weights, c=0.1, l1_ratio=0.75)
    want = lr.objective(ref, x, y, weights, c=0.1, l1_ratio=0.75)
    assert got <= want + 1e-6


def test_l1_ratio_zero_is_pure_l2():
    x, y = toy_data(n=30, d=4, seed=4)
    model = train_logreg(x, y, c=0.5, l1_ratio=0.0, tol=1e-11, max_epochs=8000, seed=0)
    ref = ista_oracle(x, y, c=0.5, l1_ratio=0.0)
    assert model.weights == pytest.approx(ref, abs=1e-5)
    # L2-only never zeroes coefficients exactly
    assert (model.weights != 0).all()


def test_l1_ratio_one_soft_threshold_fixpoint():
    x, y = toy_data(n=40, d=5, seed=5)
    c = 0.8
    model = train_logreg(x, y, c=c, l1_ratio=1.0, tol=1e-11, max_epochs=8000, seed=0)
    beta = model.weights
    # subgradient optimality: |grad_j| <= l1 where beta_j == 0,
    # grad_j == -sign(beta_j) * l1 where beta_j != 0
    grad = lr.smooth_gradient(beta, x, y, None, c=c, l1_ratio=1.0)
    l1 = 1.0 / c
    tol = 1e-3
    for j in range(len(beta)):
        if beta[j] == 0.0:
            assert abs(grad[j]) <= l1 + tol
        else:
            assert grad[j] + np.sign(beta[j]) * l1 == pytest.approx(0.0, abs=tol)


def test_extreme_l1_zeroes_everything():
    x, y = toy_data(n=30, d=8, seed=6)
    model = train_logreg(x, y, c=1e-6, l1_ratio=0.75, seed=0)
    assert (model.weights == 0.0).all()


def test_zero_weights_give_half_probability():
    model = lr.LogRegModel(weights=np.zeros(4))
    probe = np.random.default_rng(0).normal(size=(7, 4))
    assert predict_proba(model, probe) == pytest.approx(np.full(7, 0.5))


def test_separable_set_reaches_full_train_accuracy():
    rng = np.random.Generator(np.random.PCG64(7))
    x = np.vstack([rng.normal(-3, 0.5, size=(25, 3)), rng.normal(3, 0.5, size=(25, 3))])
    y = np.array([0] * 25 + [1] * 25)
    model = train_logreg(x, y, c=10.0, l1_ratio=0.5, seed=0)
    preds = (predict_proba(model, x) >= 0.5).astype(int)
    assert (preds == y).all()


def test_determinism():
    x, y = toy_data(seed=8)
    a = train_logreg(x, y, seed=3, max_epochs=50)
    b = train_logreg(x, y, seed=3, max_epochs=50)
    assert np.array_equal(a.weights, b.weights)
    assert a.n_epochs == b.n_epochs


def test_class_weight_scaling_invariance():
    # scaling every class weight by k while scaling the penalty by k
    # (c -> c/k) leaves the minimizer unchanged
    x, y = toy_data(n=40, d=4, seed=9)
    base_w = balanced_class_weights(y)
    k = 4.0
    scaled_w = {cls: k * v for cls, v in base_w.items()}
    a = train_logreg(x, y, c=0.5, l1_ratio=0.6, class_weights=base_w,
                     tol=1e-11, max_epochs=8000, seed=0)
    b = train_logreg(x, y, c=0.5 / k, l1_ratio=0.6, class_weights=scaled_w,
                     tol=1e-11, max_epochs=8000, seed=0)
    assert a.weights == pytest.approx(b.weights, abs=1e-5)


def test_intercept_is_fixed_zero():
    x, y = toy_data(seed=10)
    model = train_logreg(x, y, seed=0, max_epochs=50)
    assert model.intercept == 0.0
    with pytest.raises(ValueError):
        lr.LogRegModel(weights=np.zeros(3), intercept=0.5)


def test_validation_errors():
    x, y = toy_data()
    with pytest.raises(ValueError):
        train_logreg(x, y, c=0.0)
    with pytest.raises(ValueError):
        train_logreg(x, y, l1_ratio=1.5)
    with pytest.raises(ValueError):
        train_logreg(x[:3], np.array([1, 1, 1]))


def test_nonconvergence_warns():
    x, y = toy_data(seed=11)
    with pytest.warns(lr.ConvergenceWarning):
        model = train_logreg(x, y, tol=1e-14, max_epochs=2, seed=0)
    assert not model.converged
