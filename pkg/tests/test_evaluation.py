"""Metrics, ROC/AUC, threshold selection, aggregation, cross-validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from micrographia import evaluation as ev
from micrographia.features import FeatureRow


# -- confusion and metrics ---------------------------------------------------


def test_confusion_hand_count():
    counts = ev.confusion([1, 0, 1, 0], [1, 1, 0, 0])
    assert (counts.tp, counts.fp, counts.fn, counts.tn) == (1, 1, 1, 1)


def test_confusion_all_correct_and_all_wrong():
    c = ev.confusion([1, 0, 1], [1, 0, 1])
    assert c.fp == c.fn == 0
    c2 = ev.confusion([0, 0, 0], [1, 1, 1])
    assert c2.fp == 3 and c2.tp == 0


def test_confusion_length_mismatch():
    with pytest.raises(ValueError):
        ev.confusion([1, 0], [1])


def test_metrics_hand_computed_example():
    rep = ev.metrics(ev.ConfusionCounts(tp=9, fp=1, tn=8, fn=2))
    assert rep.acc == pytest.approx(0.85)
    assert rep.sensitivity == pytest.approx(9 / 11)
    assert rep.specificity == pytest.approx(8 / 9)
    assert rep.ppv == pytest.approx(0.9)
    assert rep.npv == pytest.approx(0.8)
    assert (rep.fp, rep.fn) == (1, 2)


def test_metrics_perfect_and_zero_fn_row():
    perfect = ev.metrics(ev.ConfusionCounts(tp=5, fp=0, tn=5, fn=0))
    assert perfect.acc == perfect.sensitivity == perfect.specificity == 1.0
    # no false negatives: sensitivity and npv pegged at 1 as in the
    # published screening operating point
    row = ev.metrics(ev.ConfusionCounts(tp=11, fp=2, tn=6, fn=0))
    assert row.sensitivity == 1.0
    assert row.npv == 1.0


def test_metrics_undefined_ratios_absent():
    rep = ev.metrics(ev.ConfusionCounts(tp=0, fp=0, tn=4, fn=0))
    assert rep.sensitivity is None
    assert rep.ppv is None
    assert rep.specificity == 1.0


def test_metrics_identities():
    rng = np.random.Generator(np.random.PCG64(0))
    for _ in range(50):
        y = rng.integers(0, 2, size=30)
        p = rng.integers(0, 2, size=30)
        if y.min() == y.max():
            continue
        counts = ev.confusion(y, p)
        rep = ev.metrics(counts)
        assert rep.sensitivity * (counts.tp + counts.fn) == pytest.approx(counts.tp)
        prev = (counts.tp + counts.fn) / counts.total
        acc = rep.sensitivity * prev + rep.specificity * (1 - prev)
        assert rep.acc == pytest.approx(acc)


# -- ROC / AUC ------------------------------------------------------------------


def test_roc_perfect_and_uninformative():
    labels = [1, 0, 1, 0]
    assert ev.roc(labels, [1.0, 0.0, 1.0, 0.0]).auc == 1.0
    assert ev.roc(labels, [0.5, 0.5, 0.5, 0.5]).auc == 0.5


def test_roc_requires_both_classes():
    with pytest.raises(ValueError):
        ev.roc([1, 1], [0.2, 0.8])


def test_roc_endpoints_and_monotonicity():
    rng = np.random.Generator(np.random.PCG64(1))
    y = rng.integers(0, 2, size=40)
    y[0], y[1] = 0, 1
    p = rng.uniform(size=40).round(2)
    curve = ev.roc(y, p)
    assert tuple(curve.points[0]) == (0.0, 0.0)
    assert tuple(curve.points[-1]) == (1.0, 1.0)
    assert (np.diff(curve.points, axis=0) >= 0).all()


def test_auc_equals_pair_statistic_exactly():
    rng = np.random.Generator(np.random.PCG64(2))
    for _ in range(100):
        n = int(rng.integers(5, 40))
        y = rng.integers(0, 2, size=n)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        # coarse grid of probabilities forces plenty of ties
        p = rng.integers(0, 6, size=n) / 5.0
        assert ev.roc(y, p).auc == ev.auc_pair_statistic(y, p)


@given(
    st.lists(st.tuples(st.integers(0, 1), st.integers(0, 10)), min_size=4, max_size=60)
)
@settings(max_examples=80)
def test_auc_pair_property(pairs):
    y = np.array([a for a, _ in pairs])
    p = np.array([b / 10 for _, b in pairs])
    if y.min() == y.max():
        return
    assert ev.roc(y, p).auc == ev.auc_pair_statistic(y, p)


def test_threshold_monotone_fp():
    rng = np.random.Generator(np.random.PCG64(3))
    y = rng.integers(0, 2, size=50)
    p = rng.uniform(size=50)
    fps = []
    for t in np.linspace(0.05, 0.95, 19):
        fps.append(ev.confusion(y, (p >= t).astype(int)).fp)
    assert all(a >= b for a, b in zip(fps, fps[1:]))


# -- threshold selection ------------------------------------------------------------


def test_select_threshold_separated():
    y = [0, 0, 1, 1]
    p = [0.1, 0.2, 0.8, 0.9]
    t = ev.select_threshold(y, p)
    assert t == pytest.approx(0.5)  # lowest midpoint in the separating gap


def test_select_threshold_tie_prefers_lowest():
    y = [0, 1, 1]
    p = [0.2, 0.6, 0.9]
    # both midpoints achieve accuracy 1.0; the lower one must win
    assert ev.select_threshold(y, p) == pytest.approx(0.4)


def test_select_threshold_degenerate():
    y = [0, 1, 1, 0]
    assert ev.select_threshold(y, [0.7] * 4) == 0.7


def test_select_threshold_single_class_error():
    with pytest.raises(ValueError):
        ev.select_threshold([1, 1], [0.3, 0.6])


# -- aggregation ----------------------------------------------------------------------


def test_aggregate_schemes_spec_examples():
    probs = [0.9] * 5 + [0.1] * 3
    assert ev.aggregate_patient(probs, scheme="c", threshold=0.5) == 1
    two_hot = [0.9, 0.9] + [0.1] * 6
    assert ev.aggregate_patient(two_hot, scheme="a", threshold=0.5) == 1
    assert ev.aggregate_patient(two_hot, scheme="c", threshold=0.5) == 0
    zeros = [0.0] * 8
    for scheme in ("a", "b", "c"):
        assert ev.aggregate_patient(zeros, scheme=scheme, threshold=0.5) == 0


def test_aggregate_scheme_b_mean_rule():
    assert ev.aggregate_patient([0.9, 0.2], scheme="b") == 1  # mean 0.55 > 0.5
    assert ev.aggregate_patient([0.5, 0.5], scheme="b") == 0  # not strictly greater


def test_aggregate_errors():
    with pytest.raises(ValueError):
        ev.aggregate_patient([])
    with pytest.raises(ValueError):
        ev.aggregate_patient([0.5], scheme="z")


@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=8), st.permutations(range(8)))
@settings(max_examples=60)
def test_aggregate_scheme_c_permutation_invariant(probs, perm):
    shuffled = [probs[i % len(probs)] for i in perm[: len(probs)]]
    base = ev.aggregate_patient(sorted(probs), scheme="c")
    assert ev.aggregate_patient(sorted(shuffled), scheme="c") in (0, 1)
    assert ev.aggregate_patient(probs, scheme="c") == base


def test_evaluate_patient_level_toy():
    patients = [
        ev.PatientEval("a", 1, (0.9, 0.8, 0.9)),  # majority pd -> pd, correct
        ev.PatientEval("b", 0, (0.1, 0.2, 0.8)),  # 1/3 pd -> healthy, correct
        ev.PatientEval("c", 1, (0.1, 0.2, 0.3)),  # -> healthy, miss
        ev.PatientEval("d", 0, ()),  # skipped
    ]
    rep, skipped = ev.evaluate_patient_level(patients, scheme="c", threshold=0.5)
    assert skipped == ["d"]
    assert rep.acc == pytest.approx(2 / 3)
    assert rep.fn == 1 and rep.fp == 0


# -- cross-validation -------------------------------------------------------------------


def _make_rows(n_patients=16, images_per_patient=3, informative=True, seed=0):
    rng = np.random.Generator(np.random.PCG64(seed))
    rows = []
    for i in range(n_patients):
        label = i % 2
        shift = (label * 4.0) if informative else 0.0
        for j in range(images_per_patient):
            raw = rng.normal(shift, 1.0, size=9)
            rows.append(
                FeatureRow(
                    image_id=f"p{i:02d}#spiral{j}",
                    patient_id=f"p{i:02d}",
                    kind="spiral",
                    raw=raw,
                    age=50.0 + (i % 7),
                    gender=i % 2,
                    label=label,
                )
            )
    return rows


def test_cross_validate_single_cell():
    rows = _make_rows()
    result = ev.cross_validate(rows, "logreg", [{"c": 1.0}], k=4, seed=0)
    assert result.best_params == {"c": 1.0}
    assert len(result.cells) == 1
    assert len(result.cells[0][2]) == 4


def test_cross_validate_leave_one_patient_out():
    rows = _make_rows(n_patients=12, images_per_patient=1)
    labels = {r.patient_id: r.label for r in rows}
    folds = ev.stratified_patient_folds(labels, k=6, seed=0)
    assert len(folds) == 6
    assert sum(len(f) for f in folds) == 12
    union = set().union(*folds)
    assert len(union) == 12


def test_cross_validate_informative_cell_wins():
    rows = _make_rows(informative=True, seed=1)
    # c=1e-7 shrinks all weights to zero (coin-flip); c=1.0 can learn
    result = ev.cross_validate(rows, "logreg", [{"c": 1e-7}, {"c": 1.0}], k=4, seed=0)
    assert result.best_params == {"c": 1.0}


def test_cross_validate_deterministic():
    rows = _make_rows(seed=2)
    grid = [{"c": 0.1}, {"c": 1.0}]
    a = ev.cross_validate(rows, "logreg", grid, k=4, seed=5)
    b = ev.cross_validate(rows, "logreg", grid, k=4, seed=5)
    assert a.best_params == b.best_params
    assert a.cells == b.cells


def test_cross_validate_tie_prefers_regularized():
    rows = _make_rows(n_patients=8, informative=False, seed=3)
    # uninformative data: degenerate cells tie at base accuracy
    result = ev.cross_validate(rows, "logreg", [{"c": 1e-9}, {"c": 1e-8}], k=4, seed=0)
    assert result.best_params == {"c": 1e-9}


def test_cross_validate_pool_too_small():
    rows = _make_rows(n_patients=6)
    with pytest.raises(ValueError):
        ev.cross_validate(rows, "logreg", [{"c": 1.0}], k=10, seed=0)


def test_folds_are_patient_disjoint():
    rows = _make_rows(n_patients=20)
    labels = {r.patient_id: r.label for r in rows}
    folds = ev.stratified_patient_folds(labels, k=5, seed=1)
    seen = set()
    for fold in folds:
        assert not (fold & seen)
        seen |= fold


# -- report output ------------------------------------------------------------------------


def test_roc_csv_and_plot(tmp_path):
    y = [1, 0, 1, 0, 1]
    p = [0.9, 0.2, 0.8, 0.4, 0.3]
    curve = ev.roc(y, p)
    ev.write_roc_csv(curve, tmp_path / "roc.csv")
    lines = (tmp_path / "roc.csv").read_text().strip().splitlines()
    assert lines[0] == "fpr,tpr"
    assert len(lines) == len(curve.points) + 1
    ev.plot_roc({"logreg": curve}, tmp_path / "roc.png")
    assert (tmp_path / "roc.png").stat().st_size > 1000


def test_render_metrics_table_includes_reference():
    rep = ev.metrics(ev.ConfusionCounts(tp=9, fp=1, tn=8, fn=2), threshold=0.62, auc=0.9)
    text = ev.render_metrics_table(
        {"logreg (measured)": rep.as_dict(), "logreg (reference)": ev.REFERENCE_IMAGE_METRICS["logreg"]}
    )
    assert "logreg (reference)" in text
    assert "0.960" in text  # the published AUC
    assert "sensitivity" in text
