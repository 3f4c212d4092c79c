"""Model evaluation: confusion metrics, ROC/AUC, threshold selection,
patient-level k-fold cross-validation with grid search, and aggregation
of image predictions into patient verdicts.

PD is always the positive class.  The AUC is computed by sweeping the
distinct probability values and accumulating the trapezoid sum in integer
arithmetic, which makes it equal the tie-aware pair-ordering statistic
exactly rather than approximately.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .features import FeatureRow, design_matrix, fit_normalization_rows
from .models import (
    LABEL_PD,
    balanced_class_weights,
    predict_proba,
    scale_gamma,
    train_logreg,
    train_svm,
)

AGGREGATION_SCHEMES = ("a", "b", "c")
DEFAULT_SCHEME = "c"

# Published baseline operating points for the combined HandPD cohort;
# reports print these beside measured metrics for side-by-side comparison.
REFERENCE_IMAGE_METRICS = {
    "svm": {
        "acc": 0.92,
        "auc": 0.93,
        "fp": 12,
        "fn": 0,
        "sensitivity": 1.0,
        "specificity": 0.81,
        "ppv": 0.89,
        "npv": 1.0,
        "threshold": 0.65,
    },
    "logreg": {
        "acc": 0.93,
        "auc": 0.96,
        "fp": 3,
        "fn": 7,
        "sensitivity": 0.92,
        "specificity": 0.95,
        "ppv": 0.90,
        "npv": 0.96,
        "threshold": 0.62,
    },
}
REFERENCE_PATIENT_ACCURACY = 0.9444


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    acc: Optional[float]
    sensitivity: Optional[float]
    specificity: Optional[float]
    ppv: Optional[float]
    npv: Optional[float]
    fp: int
    fn: int
    threshold: Optional[float] = None
    auc: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "acc": self.acc,
            "auc": self.auc,
            "fp": self.fp,
            "fn": self.fn,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "ppv": self.ppv,
            "npv": self.npv,
            "threshold": self.threshold,
        }


@dataclass(frozen=True)
class RocCurve:
    points: np.ndarray  # (m, 2) of (fpr, tpr), (0,0) .. (1,1)
    auc: float

    def __post_init__(self):
        if (np.diff(self.points, axis=0) < 0).any():
            raise ValueError("ROC points must be monotone nondecreasing")
        if not 0.0 <= self.auc <= 1.0:
            raise ValueError("AUC must lie in [0, 1]")


def confusion(labels, predictions) -> ConfusionCounts:
    y = np.asarray(labels, dtype=int)
    p = np.asarray(predictions, dtype=int)
    if y.shape != p.shape or y.ndim != 1 or len(y) == 0:
        raise ValueError("labels and predictions must be equal-length 1-d arrays")
    return ConfusionCounts(
        tp=int(((y == 1) & (p == 1)).sum()),
        fp=int(((y == 0) & (p == 1)).sum()),
        tn=int(((y == 0) & (p == 0)).sum()),
        fn=int(((y == 1) & (p == 0)).sum()),
    )


def metrics(
    counts: ConfusionCounts,
    threshold: Optional[float] = None,
    auc: Optional[float] = None,
) -> MetricsReport:
    """Ratios with zero denominators are reported as absent, not zero."""

    def ratio(num, den):
        return num / den if den > 0 else None

    return MetricsReport(
        acc=ratio(counts.tp + counts.tn, counts.total),
        sensitivity=ratio(counts.tp, counts.tp + counts.fn),
        specificity=ratio(counts.tn, counts.tn + counts.fp),
        ppv=ratio(counts.tp, counts.tp + counts.fp),
        npv=ratio(counts.tn, counts.tn + counts.fn),
        fp=counts.fp,
        fn=counts.fn,
        threshold=threshold,
        auc=auc,
    )


def roc(labels, probabilities) -> RocCurve:
    """Threshold sweep over the distinct scores; trapezoid AUC.

    The trapezoid sum is accumulated over integer counts, so the result
    is exactly the probability that a random PD case outscores a random
    healthy case, counting ties as half.
    """
    y = np.asarray(labels, dtype=int)
    p = np.asarray(probabilities, dtype=float)
    if y.shape != p.shape or y.ndim != 1:
        raise ValueError("labels and probabilities must be equal-length 1-d arrays")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes present")

    order = np.argsort(-p, kind="stable")
    y_sorted = y[order]
    p_sorted = p[order]
    boundaries = np.flatnonzero(np.diff(p_sorted)) + 1
    cut_ends = np.concatenate([boundaries, [len(y_sorted)]])
    tp_cum = np.cumsum(y_sorted == 1)[cut_ends - 1]
    fp_cum = np.cumsum(y_sorted == 0)[cut_ends - 1]

    tp = np.concatenate([[0], tp_cum])
    fp = np.concatenate([[0], fp_cum])
    # 2 * P * N * AUC, exactly, via the trapezoid rule on raw counts.
    twice_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    points = np.stack([fp / n_neg, tp / n_pos], axis=1)
    return RocCurve(points=points, auc=twice_area / (2.0 * n_pos * n_neg))


def auc_pair_statistic(labels, probabilities) -> float:
    """Brute-force ordered-pair count with half-credit ties (oracle)."""
    y = np.asarray(labels, dtype=int)
    p = np.asarray(probabilities, dtype=float)
    pos = p[y == 1]
    neg = p[y == 0]
    wins = int((pos[:, None] > neg[None, :]).sum())
    ties = int((pos[:, None] == neg[None, :]).sum())
    return (2 * wins + ties) / (2.0 * len(pos) * len(neg))


def accuracy_objective(labels, predictions) -> float:
    y = np.asarray(labels, dtype=int)
    p = np.asarray(predictions, dtype=int)
    return float((y == p).mean())


def select_threshold(
    labels,
    probabilities,
    objective: Callable[[np.ndarray, np.ndarray], float] = accuracy_objective,
) -> float:
    """Best cutoff among midpoints of the sorted distinct probabilities;
    ties resolve to the lowest cutoff, which favors sensitivity."""
    y = np.asarray(labels, dtype=int)
    p = np.asarray(probabilities, dtype=float)
    if len(np.unique(y)) < 2:
        raise ValueError("threshold selection needs both classes present")
    distinct = np.unique(p)
    if len(distinct) == 1:
        return float(distinct[0])
    candidates = (distinct[:-1] + distinct[1:]) / 2.0
    best_t, best_score = None, -np.inf
    for t in candidates:
        score = objective(y, (p >= t).astype(int))
        if score > best_score + 1e-12:
            best_t, best_score = float(t), score
    return best_t


def aggregate_patient(
    image_probs: Sequence[float],
    scheme: str = DEFAULT_SCHEME,
    threshold: float = 0.5,
) -> int:
    """Patient verdict from per-image probabilities.

    scheme a: PD iff at least 2 images classify as PD;
    scheme b: PD iff the mean probability exceeds 0.5;
    scheme c: PD iff strictly more than half the images classify as PD.
    """
    probs = np.asarray(image_probs, dtype=float)
    if probs.ndim != 1 or len(probs) == 0:
        raise ValueError("need at least one image probability")
    if scheme not in AGGREGATION_SCHEMES:
        raise ValueError(f"unknown aggregation scheme {scheme!r}")
    flagged = int((probs >= threshold).sum())
    if scheme == "a":
        return int(flagged >= 2)
    if scheme == "b":
        return int(probs.mean() > 0.5)
    return int(flagged > len(probs) / 2.0)


@dataclass(frozen=True)
class PatientEval:
    patient_id: str
    label: int
    image_probs: tuple[float, ...]


def evaluate_patient_level(
    patients: Sequence[PatientEval],
    scheme: str = DEFAULT_SCHEME,
    threshold: float = 0.5,
) -> tuple[MetricsReport, list[str]]:
    """Aggregate image probabilities into verdicts and score them.

    Patients with no usable images are skipped and listed.  The AUC uses
    the mean image probability as the patient score.
    """
    skipped = [p.patient_id for p in patients if len(p.image_probs) == 0]
    usable = [p for p in patients if len(p.image_probs) > 0]
    if not usable:
        raise ValueError("no patients with usable images")
    labels = np.array([p.label for p in usable], dtype=int)
    verdicts = np.array(
        [aggregate_patient(p.image_probs, scheme, threshold) for p in usable], dtype=int
    )
    auc = None
    if len(np.unique(labels)) == 2:
        scores = np.array([float(np.mean(p.image_probs)) for p in usable])
        auc = roc(labels, scores).auc
    return metrics(confusion(labels, verdicts), threshold=threshold, auc=auc), skipped


# ---------------------------------------------------------------------------
# Cross-validation and grid search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossValidationResult:
    best_params: dict
    best_score: float
    cells: tuple[tuple[dict, float, tuple[float, ...]], ...] = field(repr=False)


def stratified_patient_folds(
    patient_labels: dict[str, int], k: int, seed: int
) -> list[set[str]]:
    """k patient-disjoint folds, each class dealt round-robin after a
    seeded shuffle."""
    rng = np.random.Generator(np.random.PCG64(seed))
    folds: list[set[str]] = [set() for _ in range(k)]
    for cls in sorted(set(patient_labels.values())):
        ids = sorted(pid for pid, lab in patient_labels.items() if lab == cls)
        if len(ids) < k:
            raise ValueError(
                f"class {cls} has {len(ids)} patients, fewer than k={k} folds"
            )
        rng.shuffle(ids)
        for pos, pid in enumerate(ids):
            folds[pos % k].add(pid)
    return folds


def _train_for_cell(model_family: str, x, y, cell: dict, seed: int):
    weights = balanced_class_weights(y)
    if model_family == "svm":
        return train_svm(
            x,
            y,
            c=cell.get("c", 100.0),
            gamma=cell.get("gamma"),
            class_weights=weights,
            seed=seed,
        )
    if model_family == "logreg":
        return train_logreg(
            x,
            y,
            c=cell.get("c", 0.1),
            l1_ratio=cell.get("l1_ratio", 0.75),
            class_weights=weights,
            seed=seed,
        )
    raise ValueError(f"unknown model family {model_family!r}")


def _cell_sort_key(cell: dict):
    # Ties prefer the more regularized / smoother model: smaller c, then
    # smaller gamma, then the larger L1 share, then the lower threshold.
    return (
        cell.get("c", 0.0),
        cell.get("gamma") if cell.get("gamma") is not None else -1.0,
        -cell.get("l1_ratio", 0.0),
        cell.get("threshold", 0.5),
    )


def cross_validate(
    rows: Sequence[FeatureRow],
    model_family: str,
    grid: Sequence[dict],
    k: int = 10,
    seed: int = 0,
) -> CrossValidationResult:
    """Patient-level stratified k-fold grid search.

    Normalization is refit inside every fold on that fold's training rows
    only.  Cell score is the mean image-level accuracy across folds, at
    the cell's threshold if it carries one (default 0.5).
    """
    if not grid:
        raise ValueError("grid must contain at least one cell")
    labeled = [r for r in rows if r.label is not None]
    patient_labels = {r.patient_id: r.label for r in labeled}
    folds = stratified_patient_folds(patient_labels, k, seed)

    results = []
    for cell in grid:
        fold_scores = []
        for fold in folds:
            train_rows = [r for r in labeled if r.patient_id not in fold]
            test_rows = [r for r in labeled if r.patient_id in fold]
            stats = fit_normalization_rows(train_rows)
            x_train, y_train = design_matrix(train_rows, stats)
            x_test, y_test = design_matrix(test_rows, stats)
            model = _train_for_cell(model_family, x_train, y_train, cell, seed)
            probs = predict_proba(model, x_test)
            preds = (probs >= cell.get("threshold", 0.5)).astype(int)
            fold_scores.append(accuracy_objective(y_test, preds))
        results.append((dict(cell), float(np.mean(fold_scores)), tuple(fold_scores)))

    best = max(
        results, key=lambda r: (r[1], tuple(-v for v in _cell_sort_key(r[0])))
    )
    return CrossValidationResult(
        best_params=best[0], best_score=best[1], cells=tuple(results)
    )


# ---------------------------------------------------------------------------
# Report output
# ---------------------------------------------------------------------------


def write_roc_csv(curve: RocCurve, path: str | Path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        for fpr, tpr in curve.points:
            writer.writerow([format(fpr, ".17g"), format(tpr, ".17g")])


def plot_roc(curves: dict[str, RocCurve], path: str | Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 6))
    for name, curve in curves.items():
        ax.plot(curve.points[:, 0], curve.points[:, 1], label=f"{name} (AUC {curve.auc:.3f})")
    ax.plot([0, 1], [0, 1], linestyle="--", color="gray", linewidth=1)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.set_title("ROC")
    ax.legend(loc="lower right")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def _fmt(v, digits=3):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.{digits}f}"
    return str(v)


def render_metrics_table(rows: dict[str, dict]) -> str:
    """Plain-text table of metric dicts keyed by row name."""
    cols = ["acc", "auc", "fp", "fn", "sensitivity", "specificity", "ppv", "npv", "threshold"]
    header = ["model"] + cols
    table = [header]
    for name, vals in rows.items():
        table.append([name] + [_fmt(vals.get(c)) for c in cols])
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = []
    for idx, row in enumerate(table):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)))
        if idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_report_json(payload: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
