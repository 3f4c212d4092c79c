"""SMO solver correctness: KKT conditions, dual feasibility, known
geometries, calibration behavior, and determinism."""

import math

import numpy as np
import pytest

from micrographia.models import svm as svm_mod
from micrographia.models import (
    balanced_class_weights,
    predict_proba,
    rbf_kernel,
    rbf_kernel_matrix,
    train_svm,
)


def blobs(n_per_class=20, separation=6.0, seed=0, dim=2):
    rng = np.random.Generator(np.random.PCG64(seed))
    a = rng.normal(0.0, 1.0, size=(n_per_class, dim))
    b = rng.normal(separation, 1.0, size=(n_per_class, dim))
    x = np.vstack([a, b])
    y = np.array([0] * n_per_class + [1] * n_per_class)
    return x, y


def dual_gradient(model_x, y_signed, alpha_signed, gamma):
    K = rbf_kernel_matrix(model_x, model_x, gamma)
    return (K * (y_signed[None, :])).dot(alpha_signed * 1.0)  # unused helper


# -- kernel ---------------------------------------------------------------------


def test_rbf_kernel_values():
    x = np.array([1.0, 2.0, 3.0])
    assert rbf_kernel(x, x, gamma=0.7) == 1.0
    a = np.array([0.0, 0.0])
    b = np.array([1.0, 1.0])  # squared distance 2
    assert rbf_kernel(a, b, gamma=0.5) == pytest.approx(math.exp(-1), rel=1e-12)


def test_rbf_kernel_monotone_decay():
    a = np.zeros(3)
    values = [rbf_kernel(a, np.full(3, t), gamma=1.0) for t in (0.5, 1.0, 2.0, 4.0)]
    assert all(u > v for u, v in zip(values, values[1:]))
    assert values[-1] < 1e-20


def test_rbf_kernel_dimension_mismatch():
    with pytest.raises(ValueError):
        rbf_kernel(np.zeros(3), np.zeros(4), gamma=1.0)
    with pytest.raises(ValueError):
        rbf_kernel(np.zeros(3), np.zeros(3), gamma=0.0)


def test_kernel_matrix_agrees_with_scalar():
    rng = np.random.Generator(np.random.PCG64(1))
    a = rng.normal(size=(5, 4))
    b = rng.normal(size=(3, 4))
    K = rbf_kernel_matrix(a, b, gamma=0.3)
    for i in range(5):
        for j in range(3):
            assert K[i, j] == pytest.approx(rbf_kernel(a[i], b[j], 0.3), rel=1e-12)


# -- class weights -----------------------------------------------------------------


def test_balanced_weights_cohort_counts():
    labels = [0] * 53 + [1] * 74
    w = balanced_class_weights(labels)
    assert w[0] == pytest.approx(127 / 106, rel=1e-12)
    assert w[1] == pytest.approx(127 / 148, rel=1e-12)


def test_balanced_weights_even_and_skewed():
    assert balanced_class_weights([0] * 10 + [1] * 10) == {0: 1.0, 1: 1.0}
    w = balanced_class_weights([0] * 1 + [1] * 99)
    assert w[0] == pytest.approx(50.0)
    assert w[1] == pytest.approx(100 / 198, rel=1e-12)
    with pytest.raises(ValueError):
        balanced_class_weights([1, 1, 1])


# -- training ------------------------------------------------------------------------


def test_separable_blobs_kkt_and_accuracy():
    x, y = blobs(seed=3)
    model = train_svm(x, y, c=100.0, gamma=0.5, tol=1e-3, seed=0)
    assert model.converged
    assert model.kkt_violation < 1e-3
    preds = (model.decision_function(x) >= 0).astype(int)
    assert (preds == y).all()


def test_dual_feasibility_and_stationarity():
    x, y = blobs(n_per_class=15, separation=3.0, seed=7)
    weights = balanced_class_weights(y)
    model = train_svm(x, y, c=10.0, gamma=0.8, class_weights=weights, seed=0)
    y_signed = np.where(y == 1, 1.0, -1.0)
    # recover alpha for support vectors; every alpha within its box
    alphas = model.dual_coef * np.sign(model.dual_coef)
    sv_labels = (model.dual_coef > 0).astype(int)
    for a, lab in zip(alphas, sv_labels):
        bound = 10.0 * weights[lab]
        assert 0.0 <= a <= bound + 1e-9
    # sum alpha_i y_i = dual_coef sum = 0
    assert abs(model.dual_coef.sum()) < 1e-8


def test_two_point_bisector_symmetry():
    x = np.array([[0.0, 0.0], [2.0, 0.0]])
    y = np.array([0, 1])
    model = train_svm(x, y, c=100.0, gamma=0.5, calibration_folds=0, seed=0)
    f = model.decision_function
    assert f(np.array([0.0, 0.0]))[0] < 0 < f(np.array([2.0, 0.0]))[0]
    # midpoint sits on the boundary
    assert abs(f(np.array([1.0, 0.0]))[0]) < 1e-9


def test_xor_rbf_separation():
    x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0, 0, 1, 1])
    model = train_svm(x, y, c=100.0, gamma=1.0, calibration_folds=0, seed=0)
    preds = (model.decision_function(x) >= 0).astype(int)
    assert (preds == y).all()


def test_training_determinism():
    x, y = blobs(seed=11)
    a = train_svm(x, y, c=100.0, seed=4)
    b = train_svm(x, y, c=100.0, seed=4)
    assert np.array_equal(a.support_vectors, b.support_vectors)
    assert np.array_equal(a.dual_coef, b.dual_coef)
    assert a.bias == b.bias
    assert (a.platt_a, a.platt_b) == (b.platt_a, b.platt_b)


def test_weight_scaling_equals_c_scaling():
    # box bounds are c * weight, so (c, k*w) and (k*c, w) train identically
    x, y = blobs(n_per_class=12, separation=2.5, seed=5)
    k = 3.0
    w = balanced_class_weights(y)
    scaled_w = {cls: k * v for cls, v in w.items()}
    a = train_svm(x, y, c=2.0, gamma=0.6, class_weights=scaled_w, calibration_folds=0, seed=0)
    b = train_svm(x, y, c=2.0 * k, gamma=0.6, class_weights=w, calibration_folds=0, seed=0)
    assert np.allclose(a.dual_coef, b.dual_coef, rtol=1e-8, atol=1e-10)
    assert a.bias == pytest.approx(b.bias, abs=1e-9)


def test_probabilities_monotone_in_decision_value():
    x, y = blobs(seed=13)
    model = train_svm(x, y, c=100.0, seed=0)
    rng = np.random.Generator(np.random.PCG64(2))
    probe = rng.normal(3.0, 4.0, size=(50, 2))
    f = model.decision_function(probe)
    p = predict_proba(model, probe)
    order = np.argsort(f)
    assert (np.diff(p[order]) >= -1e-15).all()
    assert ((p > 0) & (p < 1)).all()


def test_gamma_scale_heuristic():
    rng = np.random.Generator(np.random.PCG64(3))
    x = rng.normal(size=(30, 11)) * 2.0
    assert svm_mod.scale_gamma(x) == pytest.approx(1.0 / (11 * x.var()), rel=1e-12)


def test_train_rejects_degenerate_inputs():
    x, y = blobs()
    with pytest.raises(ValueError):
        train_svm(x, y, gamma=-1.0)
    with pytest.raises(ValueError):
        train_svm(x[:5], np.zeros(5, dtype=int))


def test_nonconvergence_warns():
    x, y = blobs(n_per_class=25, separation=0.5, seed=9)
    with pytest.warns(svm_mod.ConvergenceWarning):
        model = train_svm(x, y, c=1000.0, gamma=5.0, max_iter=3, calibration_folds=0)
    assert not model.converged
    assert model.kkt_violation > 0


def test_platt_fit_recovers_reasonable_sigmoid():
    rng = np.random.Generator(np.random.PCG64(6))
    f = rng.normal(0, 2, size=400)
    # true generating sigmoid p = sigma(1.5 f - 0.3)
    p_true = 1 / (1 + np.exp(-(1.5 * f - 0.3)))
    y = (rng.uniform(size=400) < p_true).astype(int)
    a, b = svm_mod.fit_platt_scaling(f, y)
    assert a == pytest.approx(1.5, abs=0.35)
    assert b == pytest.approx(-0.3, abs=0.25)
