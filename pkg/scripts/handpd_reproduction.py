#!/usr/bin/env python3
"""Reproduce the published cohort experiment on a local HandPD corpus.

Expects a directory tree in the common HandPD naming (sp3-P12.jpg etc.,
"New"/"Old" ancestors marking the cohorts) plus a demographics.csv at the
corpus root with columns patient_id,age,gender,handedness (ids as emitted
by `micrographia manifest scan`, e.g. old-H7).  Steps: scan, load,
truncate the new-cohort PD patients, featurize once, then for each seed
split/train/evaluate both model families and print the measured metrics
beside the published operating points.

Usage:
    python scripts/handpd_reproduction.py <corpus_dir> [--work-dir out]
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from micrographia import dataset, evaluation, features
from micrographia.cli import main as cli_main
from micrographia.models import (
    balanced_class_weights,
    predict_proba,
    train_logreg,
    train_svm,
)

PAPER_SVM = {"c": 100.0, "threshold": 0.65}
PAPER_LOGREG = {"c": 0.1, "l1_ratio": 0.75, "threshold": 0.62}


def load_demographics(corpus_dir: Path) -> dict:
    demo_path = corpus_dir / "demographics.csv"
    if not demo_path.exists():
        raise FileNotFoundError(
            f"{demo_path} not found; the corpus images carry no age/gender, "
            "provide demographics.csv with patient_id,age,gender,handedness"
        )
    out = {}
    with open(demo_path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["patient_id"]] = {
                "age": row["age"],
                "gender": row["gender"],
                "handedness": row.get("handedness", "right"),
            }
    return out


def featurize_corpus(corpus_dir: Path, work_dir: Path) -> Path:
    work_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = work_dir / "manifest.csv"
    rows = dataset.scan_handpd_tree(corpus_dir, demographics=load_demographics(corpus_dir))
    if not rows:
        raise FileNotFoundError(f"no drawing files found under {corpus_dir}")
    dataset.write_manifest_csv(rows, manifest_path)

    records = dataset.load_manifest(manifest_path)
    records = dataset.apply_cohort_truncation(records)
    truncated_path = work_dir / "manifest_truncated.csv"
    keep = {r.patient_id for r in records}
    dataset.write_manifest_csv([r for r in rows if r["patient_id"] in keep], truncated_path)

    summary = dataset.demographic_summary(records)
    print("cohort after truncation:", json.dumps(summary, indent=2))

    features_path = work_dir / "features.csv"
    if not features_path.exists():
        rc = cli_main(["featurize", str(truncated_path), "--out", str(features_path)])
        if rc != 0:
            raise RuntimeError("featurize failed")
    return features_path


def evaluate_seed(rows, seed: int):
    patients = {}
    for r in rows:
        patients.setdefault(r.patient_id, r.label)
    from types import SimpleNamespace

    records = [
        SimpleNamespace(patient_id=pid, label="pd" if lab == 1 else "healthy")
        for pid, lab in sorted(patients.items())
    ]
    assignment = dataset.split(records, seed=seed)
    train_rows = [r for r in rows if r.patient_id in assignment.train]
    val_rows = [r for r in rows if r.patient_id in assignment.validation]
    test_rows = [r for r in rows if r.patient_id in assignment.test]

    stats = features.fit_normalization_rows(train_rows)
    x_train, y_train = features.design_matrix(train_rows, stats)
    x_val, y_val = features.design_matrix(val_rows, stats)
    x_test, y_test = features.design_matrix(test_rows, stats)
    weights = balanced_class_weights(y_train)

    outcomes = {}
    models = {
        "svm": train_svm(x_train, y_train, c=PAPER_SVM["c"], class_weights=weights, seed=seed),
        "logreg": train_logreg(
            x_train, y_train, c=PAPER_LOGREG["c"], l1_ratio=PAPER_LOGREG["l1_ratio"],
            class_weights=weights, seed=seed,
        ),
    }
    for family, model in models.items():
        threshold = PAPER_SVM["threshold"] if family == "svm" else PAPER_LOGREG["threshold"]
        if len(val_rows) and y_val is not None and len(np.unique(y_val)) == 2:
            threshold = evaluation.select_threshold(y_val, predict_proba(model, x_val))
        probs = predict_proba(model, x_test)
        curve = evaluation.roc(y_test, probs)
        preds = (probs >= threshold).astype(int)
        image_report = evaluation.metrics(
            evaluation.confusion(y_test, preds), threshold=threshold, auc=curve.auc
        )
        by_patient, labels = {}, {}
        for row, prob in zip(test_rows, probs):
            by_patient.setdefault(row.patient_id, []).append(float(prob))
            labels[row.patient_id] = row.label
        evals = [
            evaluation.PatientEval(pid, labels[pid], tuple(ps))
            for pid, ps in sorted(by_patient.items())
        ]
        patient_report, _ = evaluation.evaluate_patient_level(
            evals, scheme="c", threshold=threshold
        )
        outcomes[family] = (image_report, patient_report)
    return outcomes


def run_handpd_reproduction(corpus_dir: Path, work_dir: Path, seeds=(0, 1, 2, 3, 4)) -> dict:
    features_path = featurize_corpus(corpus_dir, work_dir)
    rows = features.read_features_csv(features_path)
    patients = {}
    for r in rows:
        patients.setdefault(r.patient_id, r.label)
    cohort = {
        "healthy": sum(1 for v in patients.values() if v == 0),
        "pd": sum(1 for v in patients.values() if v == 1),
    }

    patient_acc = {"svm": [], "logreg": []}
    image_rows = {}
    for seed in seeds:
        outcomes = evaluate_seed(rows, seed)
        for family, (image_report, patient_report) in outcomes.items():
            patient_acc[family].append(patient_report.acc)
            image_rows[f"{family} seed={seed}"] = image_report.as_dict()

    table = dict(image_rows)
    for family in ("svm", "logreg"):
        table[f"{family} (reference)"] = evaluation.REFERENCE_IMAGE_METRICS[family]
    comparison = evaluation.render_metrics_table(table)
    comparison += (
        f"\npatient-level accuracy by seed: svm={patient_acc['svm']} "
        f"logreg={patient_acc['logreg']} "
        f"(reference {evaluation.REFERENCE_PATIENT_ACCURACY})"
    )
    return {
        "cohort": cohort,
        "patient_accuracy": patient_acc,
        "comparison_table": comparison,
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("corpus_dir", type=Path)
    parser.add_argument("--work-dir", type=Path, default=Path("handpd_work"))
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    args = parser.parse_args()
    result = run_handpd_reproduction(args.corpus_dir, args.work_dir, tuple(args.seeds))
    print(result["comparison_table"])
    best = max(max(result["patient_accuracy"][f]) for f in ("svm", "logreg"))
    print(f"best patient-level accuracy: {best:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
