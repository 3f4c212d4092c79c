"""One command line for the whole pipeline.

Subcommands: manifest-scan, extract, featurize, split, train, evaluate,
predict, template, serve.  Every subcommand is deterministic given its
flags and seed; failures print one ``error: ...`` line on stderr and exit
nonzero.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import itertools
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from . import dataset, evaluation, features, imaging, service
from .geometry import radial_profile
from .models import (
    ModelArtifact,
    balanced_class_weights,
    load_artifact,
    save_artifact,
    train_logreg,
    train_svm,
)
from .scoring import score_exam


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _hash_files(*paths) -> str:
    digest = hashlib.sha256()
    for p in paths:
        digest.update(Path(p).read_bytes())
    return digest.hexdigest()


# -- manifest-scan ----------------------------------------------------------


def cmd_manifest_scan(args) -> int:
    demographics = None
    if args.demographics:
        demographics = {}
        with open(args.demographics, newline="") as fh:
            for row in csv.DictReader(fh):
                demographics[row["patient_id"]] = {
                    "age": row.get("age", ""),
                    "gender": row.get("gender", ""),
                    "handedness": row.get("handedness", ""),
                }
    rows = dataset.scan_handpd_tree(
        args.directory, default_cohort=args.cohort, demographics=demographics
    )
    if not rows:
        return _fail(f"no drawing files found under {args.directory}")
    dataset.write_manifest_csv(rows, args.out)
    print(f"wrote {len(rows)} rows ({len({r['patient_id'] for r in rows})} patients) to {args.out}")
    return 0


# -- extract / featurize ------------------------------------------------------


def _manifest_images(records):
    for record in records:
        for ref in record.images:
            yield record, ref


def cmd_extract(args) -> int:
    records = dataset.load_manifest(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    items = list(_manifest_images(records))

    def work(item):
        record, ref = item
        img = imaging.load_image(ref.path)
        return imaging.extract_trace_pair(
            img, source_id=features.make_image_id(record.patient_id, ref.kind, ref.index)
        )

    with ThreadPoolExecutor() as pool:
        pairs = list(pool.map(work, items))
    for (record, ref), pair in zip(items, pairs):
        stem = f"{record.patient_id}-{ref.kind}{ref.index}"
        imaging.save_mask(pair.exam_trace, out_dir / f"{stem}-et.png")
        imaging.save_mask(pair.handwriting_trace, out_dir / f"{stem}-ht.png")
        imaging.save_image(imaging.blend_traces(pair), out_dir / f"{stem}-blend.png")
    print(f"extracted {len(pairs)} trace pairs to {out_dir}")
    return 0


def cmd_featurize(args) -> int:
    records = dataset.load_manifest(args.manifest)
    items = list(_manifest_images(records))

    def work(item):
        record, ref = item
        image_id = features.make_image_id(record.patient_id, ref.kind, ref.index)
        try:
            img = imaging.load_image(ref.path)
            pair = imaging.extract_trace_pair(img, source_id=image_id)
            profile = radial_profile(pair)
            raw = features.compute_raw_features(
                profile, d=args.d, centered_std=args.centered_std
            )
        except ValueError as exc:
            return image_id, exc
        return image_id, features.FeatureRow(
            image_id=image_id,
            patient_id=record.patient_id,
            kind=ref.kind,
            raw=raw.as_array(),
            age=record.age,
            gender=1 if record.gender == "female" else 0,
            label=1 if record.label == "pd" else 0,
        )

    with ThreadPoolExecutor() as pool:
        results = list(pool.map(work, items))
    rows, skipped = [], 0
    for image_id, result in results:
        if isinstance(result, features.FeatureRow):
            rows.append(result)
        else:
            skipped += 1
            print(f"warning: skipping {image_id}: {result}", file=sys.stderr)
    if not rows:
        return _fail("no image produced features")
    features.write_features_csv(rows, args.out)
    print(f"wrote {len(rows)} feature rows to {args.out}" + (f" ({skipped} skipped)" if skipped else ""))
    return 0


# -- split ---------------------------------------------------------------------


def cmd_split(args) -> int:
    rows = features.read_features_csv(args.features)
    patients: dict[str, int] = {}
    for row in rows:
        if row.label is None:
            return _fail(f"row {row.image_id} is unlabeled; cannot stratify")
        patients.setdefault(row.patient_id, row.label)
    fractions = tuple(float(v) for v in args.fractions.split(","))
    records = [
        SimpleNamespace(patient_id=pid, label="pd" if lab == 1 else "healthy")
        for pid, lab in sorted(patients.items())
    ]
    assignment = dataset.split(records, fractions=fractions, seed=args.seed)
    dataset.write_split_csv(assignment, args.out)
    print(
        f"split {len(records)} patients into "
        f"{len(assignment.train)}/{len(assignment.validation)}/{len(assignment.test)} "
        f"(seed {args.seed}) -> {args.out}"
    )
    return 0


# -- train ----------------------------------------------------------------------


def _parse_grid(specs: list[str]) -> list[dict]:
    axes = {}
    for spec in specs:
        key, _, values = spec.partition("=")
        if not values:
            raise ValueError(f"bad grid axis {spec!r}, expected key=v1,v2,...")
        axes[key.strip()] = [float(v) for v in values.split(",")]
    keys = sorted(axes)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(axes[k] for k in keys))]


def cmd_train(args) -> int:
    rows = features.read_features_csv(args.features)
    assignment = dataset.load_split_csv(args.split, seed=args.seed)
    train_rows = [r for r in rows if r.patient_id in assignment.train]
    val_rows = [r for r in rows if r.patient_id in assignment.validation]
    if len(train_rows) < 2:
        return _fail("training split has fewer than 2 images")

    cv_result = None
    params: dict = {}
    if args.grid:
        pool_rows = train_rows + val_rows
        cv_result = evaluation.cross_validate(
            pool_rows, args.model, _parse_grid(args.grid), k=args.cv_folds, seed=args.seed
        )
        params = dict(cv_result.best_params)

    stats = features.fit_normalization_rows(train_rows)
    x_train, y_train = features.design_matrix(train_rows, stats)
    weights = balanced_class_weights(y_train)
    if args.model == "svm":
        model = train_svm(
            x_train,
            y_train,
            c=params.get("c", args.c if args.c is not None else 100.0),
            gamma=params.get("gamma", args.gamma),
            class_weights=weights,
            seed=args.seed,
        )
    else:
        model = train_logreg(
            x_train,
            y_train,
            c=params.get("c", args.c if args.c is not None else 0.1),
            l1_ratio=params.get("l1_ratio", args.l1_ratio),
            class_weights=weights,
            seed=args.seed,
        )

    threshold = model.threshold
    if val_rows and not args.fixed_threshold:
        x_val, y_val = features.design_matrix(val_rows, stats)
        if y_val is not None and len(np.unique(y_val)) == 2:
            from .models import predict_proba

            threshold = evaluation.select_threshold(y_val, predict_proba(model, x_val))
    elif args.fixed_threshold:
        threshold = args.fixed_threshold

    artifact = ModelArtifact(
        kind=args.model,
        model=_with_threshold(model, threshold),
        normalization=stats,
        threshold=threshold,
        neighbor_offset=args.d,
        centered_std=args.centered_std,
        train_patient_ids=tuple(sorted(assignment.train)),
        manifest_hash=_hash_files(args.features, args.split),
        seed=args.seed,
    )
    save_artifact(artifact, args.out)
    print(f"trained {args.model} on {len(train_rows)} images; threshold {threshold:.4f} -> {args.out}")
    if cv_result is not None:
        report_path = Path(args.out).with_suffix(".cv.json")
        evaluation.write_report_json(
            {
                "model": args.model,
                "seed": args.seed,
                "folds": args.cv_folds,
                "best_params": cv_result.best_params,
                "best_score": cv_result.best_score,
                "cells": [
                    {"params": c[0], "mean_accuracy": c[1], "fold_scores": list(c[2])}
                    for c in cv_result.cells
                ],
            },
            report_path,
        )
        print(f"cross-validation report -> {report_path}")
    return 0


def _with_threshold(model, threshold: float):
    from dataclasses import replace

    return replace(model, threshold=float(threshold))


# -- evaluate ---------------------------------------------------------------------


def cmd_evaluate(args) -> int:
    artifact = load_artifact(args.artifact)
    rows = features.read_features_csv(args.features)
    assignment = dataset.load_split_csv(args.split)

    leaked = set(artifact.train_patient_ids) & assignment.test
    if leaked:
        return _fail(
            f"artifact normalization was fit on test patients: {sorted(leaked)[:5]}"
        )

    test_rows = [r for r in rows if r.patient_id in assignment.test]
    if not test_rows:
        return _fail("test split matched no feature rows")
    x_test, y_test = features.design_matrix(test_rows, artifact.normalization)
    if y_test is None:
        return _fail("test rows must be labeled")
    probs = artifact.predict_proba(x_test)
    preds = (probs >= artifact.threshold).astype(int)
    curve = None
    if len(np.unique(y_test)) == 2:
        curve = evaluation.roc(y_test, probs)
    else:
        print("warning: test split holds a single class; skipping ROC", file=sys.stderr)
    image_report = evaluation.metrics(
        evaluation.confusion(y_test, preds),
        threshold=artifact.threshold,
        auc=None if curve is None else curve.auc,
    )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "model": artifact.kind,
        "seed": artifact.seed,
        "threshold": artifact.threshold,
        "manifest_hash": artifact.manifest_hash,
        "test_patients": sorted(assignment.test),
        "image_level": image_report.as_dict(),
        "reference_image_level": evaluation.REFERENCE_IMAGE_METRICS[artifact.kind],
    }
    table_rows = {
        f"{artifact.kind} (measured)": image_report.as_dict(),
        f"{artifact.kind} (reference)": evaluation.REFERENCE_IMAGE_METRICS[artifact.kind],
    }

    if args.patient_level:
        by_patient: dict[str, list[float]] = {}
        labels: dict[str, int] = {}
        for row, prob in zip(test_rows, probs):
            by_patient.setdefault(row.patient_id, []).append(float(prob))
            labels[row.patient_id] = row.label
        evals = [
            evaluation.PatientEval(pid, labels[pid], tuple(ps))
            for pid, ps in sorted(by_patient.items())
        ]
        patient_report, skipped = evaluation.evaluate_patient_level(
            evals, scheme=args.scheme, threshold=artifact.threshold
        )
        payload["patient_level"] = patient_report.as_dict()
        payload["patient_level"]["scheme"] = args.scheme
        payload["patient_level"]["skipped_patients"] = skipped
        payload["reference_patient_accuracy"] = evaluation.REFERENCE_PATIENT_ACCURACY
        table_rows[f"{artifact.kind} patient-level (scheme {args.scheme})"] = (
            patient_report.as_dict()
        )

    evaluation.write_report_json(payload, out_dir / "report.json")
    if curve is not None:
        evaluation.write_roc_csv(curve, out_dir / "roc.csv")
        evaluation.plot_roc({artifact.kind: curve}, out_dir / "roc.png")
    print(evaluation.render_metrics_table(table_rows))
    print(f"report -> {out_dir / 'report.json'}")
    return 0


# -- predict / template / serve ------------------------------------------------


def cmd_predict(args) -> int:
    artifact = load_artifact(args.artifact)
    gender_code = 1 if args.gender == "female" else 0
    kinds = (args.kinds.split(",") if args.kinds else ["spiral"] * len(args.images))
    if len(kinds) != len(args.images):
        return _fail("kinds must align with images")
    loaded = [(k, imaging.load_image(p)) for k, p in zip(kinds, args.images)]
    try:
        outcome = score_exam(artifact, loaded, args.age, gender_code, scheme=args.scheme)
    except ValueError as exc:
        return _fail(str(exc))
    doc = {
        "verdict": "pd" if outcome.verdict == 1 else "healthy",
        "verdict_probability": outcome.verdict_probability,
        "low_confidence": outcome.low_confidence,
        "per_image": [
            {
                "path": str(p),
                "kind": s.kind,
                "probability": s.probability,
                "label": None if s.label is None else ("pd" if s.label else "healthy"),
                "error": s.error,
            }
            for p, s in zip(args.images, outcome.per_image)
        ],
    }
    print(json.dumps(doc, indent=2))
    return 0


def cmd_template(args) -> int:
    spec = imaging.TemplateSpec(page_width=args.width, page_height=args.height)
    imaging.save_image(imaging.generate_assessment_template(spec), args.out)
    print(f"template -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    config = service.load_config(args.config)
    service.run(config)
    return 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="micrographia",
        description="Drawing-exam screening pipeline: extraction, features, "
        "training, evaluation, and the assessment portal.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    manifest = sub.add_parser("manifest", help="manifest tooling")
    manifest_sub = manifest.add_subparsers(dest="manifest_command", required=True)
    p = manifest_sub.add_parser("scan", help="emit a manifest CSV from a corpus tree")
    p.add_argument("directory")
    p.add_argument("--out", default="manifest.csv")
    p.add_argument("--cohort", default="old_handpd", choices=dataset.COHORTS)
    p.add_argument("--demographics", help="CSV of patient_id,age,gender,handedness")
    p.set_defaults(func=cmd_manifest_scan)

    p = sub.add_parser("extract", help="write ET/HT masks and blends for every image")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("featurize", help="compute feature rows for every image")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--d", type=int, default=features.DEFAULT_NEIGHBOR_OFFSET,
                   choices=features.NEIGHBOR_OFFSET_SWEEP, help="relative-tremor offset")
    p.add_argument("--centered-std", action="store_true",
                   help="use the centered std convention for f4/f8")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("split", help="patient-level stratified split")
    p.add_argument("features")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fractions", default="0.765,0.085,0.15")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model and write its artifact")
    p.add_argument("features")
    p.add_argument("split")
    p.add_argument("--model", required=True, choices=("svm", "logreg"))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--l1-ratio", type=float, default=0.75, dest="l1_ratio")
    p.add_argument("--grid", action="append", default=[],
                   help="grid axis key=v1,v2,...; repeat per axis")
    p.add_argument("--cv-folds", type=int, default=10)
    p.add_argument("--fixed-threshold", type=float, default=None,
                   help="skip validation threshold selection")
    p.add_argument("--d", type=int, default=features.DEFAULT_NEIGHBOR_OFFSET,
                   help="relative-tremor offset the feature rows were computed with")
    p.add_argument("--centered-std", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score an artifact on the test split")
    p.add_argument("artifact")
    p.add_argument("features")
    p.add_argument("split")
    p.add_argument("--out-dir", default="reports")
    p.add_argument("--patient-level", action="store_true")
    p.add_argument("--scheme", default="c", choices=evaluation.AGGREGATION_SCHEMES)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="score loose images as one exam")
    p.add_argument("artifact")
    p.add_argument("images", nargs="+")
    p.add_argument("--age", type=float, required=True)
    p.add_argument("--gender", required=True, choices=("male", "female"))
    p.add_argument("--kinds", help="comma-separated drawing kinds per image")
    p.add_argument("--scheme", default="c", choices=evaluation.AGGREGATION_SCHEMES)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("template", help="write the printable assessment page")
    p.add_argument("--out", default="assessment.png")
    p.add_argument("--width", type=int, default=1600)
    p.add_argument("--height", type=int, default=1000)
    p.set_defaults(func=cmd_template)

    p = sub.add_parser("serve", help="run the assessment portal service")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
