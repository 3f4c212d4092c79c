"""Shared fixtures: a synthetic exam cohort extracted once per session,
a small trained artifact, and a terminal summary that prints one PASS/FAIL
line per acceptance criterion."""

from __future__ import annotations

import numpy as np
import pytest

from micrographia import geometry, imaging, synthetic
from micrographia import features as feat
from micrographia.models import (
    ModelArtifact,
    balanced_class_weights,
    save_artifact,
    train_logreg,
)

N_PATIENTS_PER_CLASS = 5
IMAGES_PER_PATIENT = 4
COHORT_SEED = 42


def extract_feature_rows(patients):
    rows = []
    for p in patients:
        counters = {}
        for kind, img in p.images:
            counters[kind] = counters.get(kind, 0) + 1
            pair = imaging.extract_trace_pair(img)
            profile = geometry.radial_profile(pair)
            raw = feat.compute_raw_features(profile)
            rows.append(
                feat.FeatureRow(
                    image_id=feat.make_image_id(p.patient_id, kind, counters[kind]),
                    patient_id=p.patient_id,
                    kind=kind,
                    raw=raw.as_array(),
                    age=p.age,
                    gender=p.gender,
                    label=p.label,
                )
            )
    return rows


@pytest.fixture(scope="session")
def synth_patients():
    return synthetic.synthetic_cohort(
        N_PATIENTS_PER_CLASS,
        N_PATIENTS_PER_CLASS,
        images_per_patient=IMAGES_PER_PATIENT,
        seed=COHORT_SEED,
    )


@pytest.fixture(scope="session")
def synth_features(synth_patients):
    return extract_feature_rows(synth_patients)


@pytest.fixture(scope="session")
def synth_split(synth_features):
    """Patient-level split: 3 low + 3 high tremor patients train, 2 + 2 test."""
    low = sorted({r.patient_id for r in synth_features if r.label == 0})
    high = sorted({r.patient_id for r in synth_features if r.label == 1})
    return {"train": set(low[:3] + high[:3]), "test": set(low[3:] + high[3:])}


@pytest.fixture(scope="session")
def tiny_artifact(synth_features, synth_split):
    train_rows = [r for r in synth_features if r.patient_id in synth_split["train"]]
    stats = feat.fit_normalization_rows(train_rows)
    x, y = feat.design_matrix(train_rows, stats)
    model = train_logreg(
        x, y, c=0.1, l1_ratio=0.75, class_weights=balanced_class_weights(y), seed=0
    )
    return ModelArtifact(
        kind="logreg",
        model=model,
        normalization=stats,
        threshold=model.threshold,
        train_patient_ids=tuple(sorted(synth_split["train"])),
        manifest_hash="synthetic-fixture",
        seed=0,
    )


@pytest.fixture(scope="session")
def tiny_artifact_path(tmp_path_factory, tiny_artifact):
    path = tmp_path_factory.mktemp("artifact") / "model.json"
    save_artifact(tiny_artifact, path)
    return path


_CRITERION_BY_TEST = {
    "test_feature_oracle_equivalence": "feature-oracle equivalence (1000 profiles, 1e-9)",
    "test_worked_value_checks": "worked-value checks (F1/F4/F5/F9/normalization)",
    "test_solver_correctness": "solver correctness (gradient/objective/KKT/blobs)",
    "test_metric_roc_correctness": "metric/ROC correctness (pair oracle + hand counts)",
    "test_synthetic_end_to_end": "synthetic end-to-end (AUC >= 0.95, patient separation)",
    "test_handpd_reproduction": "HandPD reproduction (patient acc >= 0.85, 5 seeds)",
    "test_imaging_golden": "imaging golden tests (units, template recall, determinism)",
    "test_service_contract": "service contract (auth, exam, durability, isolation)",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    words = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    lines = set()
    for outcome, word in words.items():
        for report in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py" not in getattr(report, "nodeid", ""):
                continue
            if report.when not in ("call", "setup"):
                continue
            name = report.nodeid.split("::")[-1]
            lines.add((word, _CRITERION_BY_TEST.get(name, name)))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for word, label in sorted(lines, key=lambda t: t[1]):
            terminalreporter.write_line(f"{word}  {label}")
