"""Manifest loading, cohort truncation, and patient-level splitting."""

import csv
from types import SimpleNamespace

import numpy as np
import pytest
from PIL import Image

from micrographia import dataset


def fake_patient(pid, label="healthy", cohort="old_handpd", age=50.0,
                 gender="male", handedness="right"):
    images = tuple(
        dataset.ImageRef(kind=kind, index=i, path=f"/nonexistent/{pid}-{kind}{i}.png")
        for kind in ("spiral", "meander")
        for i in range(1, 5)
    )
    return dataset.PatientRecord(
        patient_id=pid,
        age=age,
        gender=gender,
        handedness=handedness,
        label=label,
        cohort=cohort,
        images=images,
    )


def write_manifest(tmp_path, patients, mutate=None):
    """patients: list of (pid, label, cohort); writes 8 tiny images each."""
    img_dir = tmp_path / "imgs"
    img_dir.mkdir(exist_ok=True)
    rows = []
    for pid, label, cohort in patients:
        for kind in ("spiral", "meander"):
            for i in range(1, 5):
                name = f"{pid}-{kind}{i}.png"
                Image.new("RGB", (4, 4), (255, 255, 255)).save(img_dir / name)
                rows.append(
                    {
                        "patient_id": pid,
                        "age": "55",
                        "gender": "male",
                        "handedness": "right",
                        "label": label,
                        "cohort": cohort,
                        "kind": kind,
                        "index": i,
                        "image_path": str(img_dir / name),
                    }
                )
    if mutate:
        rows = mutate(rows)
    path = tmp_path / "manifest.csv"
    dataset.write_manifest_csv(rows, path)
    return path


# -- loading -------------------------------------------------------------------


def test_load_well_formed(tmp_path):
    path = write_manifest(tmp_path, [("p1", "healthy", "old_handpd"), ("p2", "pd", "new_handpd")])
    records = dataset.load_manifest(path)
    assert len(records) == 2
    by_id = {r.patient_id: r for r in records}
    assert by_id["p2"].label == "pd"
    assert len(by_id["p1"].images) == 8


def test_load_missing_image_row(tmp_path):
    path = write_manifest(
        tmp_path, [("p1", "healthy", "old_handpd")], mutate=lambda rows: rows[:-1]
    )
    with pytest.raises(dataset.ManifestError) as err:
        dataset.load_manifest(path)
    assert "p1" in str(err.value)


def test_load_duplicate_image(tmp_path):
    def dup(rows):
        rows[1] = dict(rows[0])
        return rows

    path = write_manifest(tmp_path, [("p1", "healthy", "old_handpd")], mutate=dup)
    with pytest.raises(dataset.ManifestError) as err:
        dataset.load_manifest(path)
    assert "duplicate" in str(err.value)


def test_load_conflicting_demographics(tmp_path):
    def conflict(rows):
        rows[3] = dict(rows[3], age="60")
        return rows

    path = write_manifest(tmp_path, [("p1", "healthy", "old_handpd")], mutate=conflict)
    with pytest.raises(dataset.ManifestError) as err:
        dataset.load_manifest(path)
    assert "conflicting" in str(err.value)


def test_load_missing_file(tmp_path):
    def break_path(rows):
        rows[0] = dict(rows[0], image_path=str(tmp_path / "gone.png"))
        return rows

    path = write_manifest(tmp_path, [("p1", "healthy", "old_handpd")], mutate=break_path)
    with pytest.raises(dataset.ManifestError) as err:
        dataset.load_manifest(path)
    assert "missing" in str(err.value)


def test_load_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(dataset.ManifestError):
        dataset.load_manifest(path)


def test_load_undecodable_image(tmp_path):
    def corrupt(rows):
        broken = tmp_path / "imgs" / "broken.png"
        broken.write_bytes(b"not a png")
        rows[0] = dict(rows[0], image_path=str(broken))
        return rows

    path = write_manifest(tmp_path, [("p1", "healthy", "old_handpd")], mutate=corrupt)
    with pytest.raises(dataset.ManifestError) as err:
        dataset.load_manifest(path)
    assert "decode" in str(err.value)


# -- truncation ------------------------------------------------------------------


def test_truncation_to_cohort_counts():
    records = (
        [fake_patient(f"h{i}") for i in range(53)]
        + [fake_patient(f"po{i}", label="pd") for i in range(74)]
        + [fake_patient(f"pn{i}", label="pd", cohort="new_handpd") for i in range(31)]
    )
    assert len(records) == 158
    kept = dataset.apply_cohort_truncation(records)
    assert len(kept) == 127
    assert sum(1 for r in kept if r.label == "healthy") == 53
    assert sum(1 for r in kept if r.label == "pd") == 74
    # idempotent
    assert dataset.apply_cohort_truncation(kept) == kept


def test_truncation_noop_and_empty():
    records = [fake_patient("h1"), fake_patient("p1", label="pd")]
    assert dataset.apply_cohort_truncation(records) == records
    assert dataset.apply_cohort_truncation([]) == []


def test_truncation_keeps_new_healthy():
    records = [fake_patient("h1", cohort="new_handpd"), fake_patient("p1", label="pd", cohort="new_handpd")]
    kept = dataset.apply_cohort_truncation(records)
    assert [r.patient_id for r in kept] == ["h1"]


# -- splitting --------------------------------------------------------------------


def cohort_127():
    return [fake_patient(f"h{i}") for i in range(53)] + [
        fake_patient(f"p{i}", label="pd") for i in range(74)
    ]


def test_split_sizes_and_stratification():
    assignment = dataset.split(cohort_127(), seed=11)
    assert len(assignment.train) == 97
    assert len(assignment.validation) == 11
    assert len(assignment.test) == 19
    test_pd = sum(1 for pid in assignment.test if pid.startswith("p"))
    assert test_pd == 11
    assert len(assignment.test) - test_pd == 8


def test_split_deterministic_and_seed_sensitive():
    a = dataset.split(cohort_127(), seed=3)
    b = dataset.split(cohort_127(), seed=3)
    c = dataset.split(cohort_127(), seed=4)
    assert a == b
    assert a != c


def test_split_all_train():
    assignment = dataset.split(cohort_127(), fractions=(1.0, 0.0, 0.0), seed=0)
    assert len(assignment.train) == 127
    assert not assignment.validation and not assignment.test


def test_split_disjoint_and_complete():
    records = cohort_127()
    assignment = dataset.split(records, seed=9)
    all_ids = {r.patient_id for r in records}
    union = assignment.train | assignment.validation | assignment.test
    assert union == all_ids
    assert len(assignment.train) + len(assignment.validation) + len(assignment.test) == 127


def test_split_stratification_within_ten_points():
    records = cohort_127()
    cohort_pd = 74 / 127
    assignment = dataset.split(records, seed=2)
    for ids in (assignment.train, assignment.validation, assignment.test):
        pd_frac = sum(1 for pid in ids if pid.startswith("p")) / len(ids)
        assert abs(pd_frac - cohort_pd) <= 0.10


def test_split_errors():
    with pytest.raises(dataset.SplitError):
        dataset.split(cohort_127(), fractions=(0.5, 0.4, 0.2), seed=0)
    small = [fake_patient("h1"), fake_patient("p1", label="pd")]
    with pytest.raises(dataset.SplitError):
        dataset.split(small, seed=0)  # cannot populate validation and test
    with pytest.raises(dataset.SplitError):
        dataset.split([], seed=0)


def test_split_accepts_lightweight_records():
    pairs = [SimpleNamespace(patient_id=f"x{i}", label="pd" if i % 3 else "healthy") for i in range(30)]
    assignment = dataset.split(pairs, fractions=(0.5, 0.25, 0.25), seed=1)
    assert len(assignment.train) == 15


def test_split_csv_roundtrip(tmp_path):
    assignment = dataset.split(cohort_127(), seed=7)
    path = tmp_path / "split.csv"
    dataset.write_split_csv(assignment, path)
    loaded = dataset.load_split_csv(path, seed=7)
    assert loaded == assignment


# -- demographics summary -------------------------------------------------------------


def test_demographic_summary():
    records = [
        fake_patient("h1", age=40.0, gender="female", handedness="left"),
        fake_patient("h2", age=48.0),
        fake_patient("p1", label="pd", age=60.0),
    ]
    summary = dataset.demographic_summary(records)
    assert summary["healthy"]["count"] == 2
    assert summary["healthy"]["mean_age"] == pytest.approx(44.0)
    assert summary["healthy"]["pct_female"] == pytest.approx(50.0)
    assert summary["healthy"]["left_handed"] == 1
    assert summary["pd"]["count"] == 1


# -- scanning ----------------------------------------------------------------------------


def test_scan_handpd_tree(tmp_path):
    new = tmp_path / "NewHandPD" / "Spiral"
    old = tmp_path / "OldHandPD" / "Meander"
    new.mkdir(parents=True)
    old.mkdir(parents=True)
    for i in range(1, 5):
        Image.new("RGB", (4, 4)).save(new / f"sp{i}-H7.jpg")
        Image.new("RGB", (4, 4)).save(old / f"mea{i}-P12.jpg")
    rows = dataset.scan_handpd_tree(tmp_path)
    assert len(rows) == 8
    by_pid = {}
    for r in rows:
        by_pid.setdefault(r["patient_id"], []).append(r)
    assert set(by_pid) == {"new-H7", "old-P12"}
    assert all(r["label"] == "healthy" for r in by_pid["new-H7"])
    assert all(r["kind"] == "meander" for r in by_pid["old-P12"])
    assert all(r["cohort"] == "new_handpd" for r in by_pid["new-H7"])


def test_scan_with_demographics(tmp_path):
    d = tmp_path / "OldHandPD"
    d.mkdir()
    Image.new("RGB", (4, 4)).save(d / "sp1-H1.jpg")
    rows = dataset.scan_handpd_tree(
        tmp_path, demographics={"old-H1": {"age": "61", "gender": "female", "handedness": "left"}}
    )
    assert rows[0]["age"] == "61"
    assert rows[0]["gender"] == "female"
