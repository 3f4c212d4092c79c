"""Corpus ingestion and patient-level splitting.

A drawing corpus is described by a manifest CSV with one row per image
(schema in ``MANIFEST_COLUMNS``), which decouples ingestion from however
the archive happens to be laid out on disk.  Splitting is done at the
patient level so no patient's drawings leak across splits.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

MANIFEST_COLUMNS = (
    "patient_id",
    "age",
    "gender",
    "handedness",
    "label",
    "cohort",
    "kind",
    "index",
    "image_path",
)

SPLIT_COLUMNS = ("patient_id", "split")

GENDERS = ("male", "female")
HANDEDNESS = ("left", "right")
LABELS = ("healthy", "pd")
COHORTS = ("old_handpd", "new_handpd")
KINDS = ("spiral", "meander")

IMAGES_PER_PATIENT = 8
IMAGES_PER_KIND = 4

DEFAULT_FRACTIONS = (0.765, 0.085, 0.15)
SPLIT_NAMES = ("train", "validation", "test")


class ManifestError(ValueError):
    """A manifest file failed validation; message carries row numbers."""


class SplitError(ValueError):
    """The cohort cannot populate the requested splits."""


@dataclass(frozen=True)
class ImageRef:
    kind: str
    index: int
    path: Path


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    age: float
    gender: str
    handedness: str
    label: str
    cohort: str
    images: tuple[ImageRef, ...]

    def __post_init__(self):
        if len(self.images) != IMAGES_PER_PATIENT:
            raise ValueError(
                f"patient {self.patient_id}: expected {IMAGES_PER_PATIENT} images, "
                f"got {len(self.images)}"
            )
        for kind in KINDS:
            n = sum(1 for im in self.images if im.kind == kind)
            if n != IMAGES_PER_KIND:
                raise ValueError(
                    f"patient {self.patient_id}: expected {IMAGES_PER_KIND} "
                    f"{kind} images, got {n}"
                )
        if self.age <= 0:
            raise ValueError(f"patient {self.patient_id}: age must be positive")


@dataclass(frozen=True)
class SplitAssignment:
    train: frozenset[str]
    validation: frozenset[str]
    test: frozenset[str]
    seed: int

    def __post_init__(self):
        sets = (self.train, self.validation, self.test)
        total = sum(len(s) for s in sets)
        if len(self.train | self.validation | self.test) != total:
            raise ValueError("split sets must be pairwise disjoint")

    def split_of(self, patient_id: str) -> str:
        for name, ids in zip(SPLIT_NAMES, (self.train, self.validation, self.test)):
            if patient_id in ids:
                return name
        raise KeyError(f"patient {patient_id!r} not in any split")


def load_manifest(path: str | Path, check_images: bool = True) -> list[PatientRecord]:
    """Parse and validate a manifest CSV into patient records."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != MANIFEST_COLUMNS:
            raise ManifestError(
                f"manifest header must be {','.join(MANIFEST_COLUMNS)}, "
                f"got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            rows.append((lineno, row))
    if not rows:
        return []

    by_patient: dict[str, list[tuple[int, dict]]] = {}
    for lineno, row in rows:
        pid = row["patient_id"].strip()
        if not pid:
            raise ManifestError(f"row {lineno}: empty patient_id")
        by_patient.setdefault(pid, []).append((lineno, row))

    records = []
    for pid, patient_rows in by_patient.items():
        records.append(_build_patient(pid, patient_rows, path.parent, check_images))
    return records


def _build_patient(pid, patient_rows, base_dir: Path, check_images: bool) -> PatientRecord:
    first_lineno, first = patient_rows[0]
    demo = {}
    for field in ("age", "gender", "handedness", "label", "cohort"):
        for lineno, row in patient_rows:
            if row[field].strip() != first[field].strip():
                raise ManifestError(
                    f"row {lineno}: patient {pid} has conflicting {field!r} "
                    f"({row[field]!r} vs {first[field]!r})"
                )
        demo[field] = first[field].strip()

    try:
        age = float(demo["age"])
    except ValueError:
        raise ManifestError(
            f"row {first_lineno}: patient {pid} has non-numeric age {demo['age']!r}"
        ) from None
    for field, allowed in (
        ("gender", GENDERS),
        ("handedness", HANDEDNESS),
        ("label", LABELS),
        ("cohort", COHORTS),
    ):
        if demo[field] not in allowed:
            raise ManifestError(
                f"row {first_lineno}: patient {pid} has {field}={demo[field]!r}, "
                f"expected one of {allowed}"
            )

    images, seen = [], set()
    for lineno, row in patient_rows:
        kind = row["kind"].strip()
        if kind not in KINDS:
            raise ManifestError(f"row {lineno}: unknown drawing kind {kind!r}")
        try:
            index = int(row["index"])
        except ValueError:
            raise ManifestError(f"row {lineno}: non-integer index {row['index']!r}") from None
        if (kind, index) in seen:
            raise ManifestError(
                f"row {lineno}: duplicate image ({kind}, {index}) for patient {pid}"
            )
        seen.add((kind, index))
        img_path = Path(row["image_path"])
        if not img_path.is_absolute():
            img_path = base_dir / img_path
        if not img_path.exists():
            raise ManifestError(f"row {lineno}: image file missing: {img_path}")
        if check_images:
            try:
                with Image.open(img_path) as im:
                    im.verify()
            except Exception as exc:
                raise ManifestError(
                    f"row {lineno}: image does not decode: {img_path} ({exc})"
                ) from None
        images.append(ImageRef(kind=kind, index=index, path=img_path))

    images.sort(key=lambda im: (im.kind, im.index))
    try:
        return PatientRecord(
            patient_id=pid,
            age=age,
            gender=demo["gender"],
            handedness=demo["handedness"],
            label=demo["label"],
            cohort=demo["cohort"],
            images=tuple(images),
        )
    except ValueError as exc:
        raise ManifestError(f"row {first_lineno}: {exc}") from None


def apply_cohort_truncation(records: list[PatientRecord]) -> list[PatientRecord]:
    """Drop PD patients of the new_handpd cohort; the combined corpus is
    otherwise too imbalanced to train on.  Healthy patients stay."""
    return [
        r for r in records if not (r.label == "pd" and r.cohort == "new_handpd")
    ]


def _largest_remainder(total: int, fractions) -> list[int]:
    """Integer allocation of ``total`` by fractions; remainders assigned
    largest-first, ties to the earliest split (train)."""
    ideal = [total * f for f in fractions]
    counts = [int(np.floor(v)) for v in ideal]
    order = sorted(
        range(len(fractions)), key=lambda s: (-(ideal[s] - counts[s]), s)
    )
    for s in order[: total - sum(counts)]:
        counts[s] += 1
    return counts


def split(
    records: list[PatientRecord],
    fractions=DEFAULT_FRACTIONS,
    seed: int = 0,
) -> SplitAssignment:
    """Random patient-level split, stratified by label.

    Overall split sizes follow largest-remainder rounding of the whole
    cohort; per-label allocations are then reconciled to those totals so
    each split keeps roughly the cohort's class balance.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise SplitError(f"fractions must sum to 1, got {fractions}")
    if len(fractions) != 3:
        raise SplitError("expected (train, validation, test) fractions")
    if not records:
        raise SplitError("no records to split")

    targets = _largest_remainder(len(records), fractions)
    for name, frac, tgt in zip(SPLIT_NAMES, fractions, targets):
        if frac > 0 and tgt == 0:
            raise SplitError(
                f"cohort of {len(records)} patients cannot populate the "
                f"{name} split at fraction {frac}"
            )

    classes = sorted({r.label for r in records})
    by_class = {c: sorted(r.patient_id for r in records if r.label == c) for c in classes}
    counts = {c: _largest_remainder(len(by_class[c]), fractions) for c in classes}
    ideal = {c: [len(by_class[c]) * f for f in fractions] for c in classes}

    # Per-class rounding can miss the global targets by a patient or two;
    # shift patients between splits (within a class) until columns match,
    # always moving from the most overfull cell to the most underfull.
    col = [sum(counts[c][s] for c in classes) for s in range(3)]
    while col != targets:
        over = [s for s in range(3) if col[s] > targets[s]]
        under = [s for s in range(3) if col[s] < targets[s]]
        best = None
        for s in over:
            for t in under:
                for c in classes:
                    if counts[c][s] == 0:
                        continue
                    gain = (counts[c][s] - ideal[c][s]) - (counts[c][t] - ideal[c][t])
                    key = (-gain, c, s, t)
                    if best is None or key < best:
                        best = key
        if best is None:
            raise SplitError("unable to reconcile stratified split with targets")
        _, c, s, t = best
        counts[c][s] -= 1
        counts[c][t] += 1
        col[s] -= 1
        col[t] += 1

    rng = np.random.Generator(np.random.PCG64(seed))
    assigned: dict[str, set[str]] = {name: set() for name in SPLIT_NAMES}
    for c in classes:
        ids = list(by_class[c])
        rng.shuffle(ids)
        start = 0
        for name, n in zip(SPLIT_NAMES, counts[c]):
            assigned[name].update(ids[start : start + n])
            start += n

    return SplitAssignment(
        train=frozenset(assigned["train"]),
        validation=frozenset(assigned["validation"]),
        test=frozenset(assigned["test"]),
        seed=seed,
    )


def write_split_csv(assignment: SplitAssignment, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SPLIT_COLUMNS)
        for name, ids in zip(
            SPLIT_NAMES, (assignment.train, assignment.validation, assignment.test)
        ):
            for pid in sorted(ids):
                writer.writerow([pid, name])


def load_split_csv(path: str | Path, seed: int = -1) -> SplitAssignment:
    sets: dict[str, set[str]] = {name: set() for name in SPLIT_NAMES}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != SPLIT_COLUMNS:
            raise ManifestError(
                f"split header must be {','.join(SPLIT_COLUMNS)}, got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            name = row["split"].strip()
            if name not in sets:
                raise ManifestError(f"row {lineno}: unknown split {name!r}")
            sets[name].add(row["patient_id"].strip())
    return SplitAssignment(
        train=frozenset(sets["train"]),
        validation=frozenset(sets["validation"]),
        test=frozenset(sets["test"]),
        seed=seed,
    )


def demographic_summary(records: list[PatientRecord]) -> dict:
    """Per-label cohort demographics, used as a data-integrity check."""
    out = {}
    for label in LABELS:
        group = [r for r in records if r.label == label]
        if not group:
            continue
        ages = np.array([r.age for r in group], dtype=float)
        out[label] = {
            "count": len(group),
            "mean_age": float(ages.mean()),
            "sd_age": float(ages.std(ddof=1)) if len(group) > 1 else 0.0,
            "left_handed": sum(1 for r in group if r.handedness == "left"),
            "right_handed": sum(1 for r in group if r.handedness == "right"),
            "pct_female": 100.0 * sum(1 for r in group if r.gender == "female") / len(group),
        }
    return out


# ---------------------------------------------------------------------------
# Manifest scanning for archives in the common HandPD folder naming
# ---------------------------------------------------------------------------

_HANDPD_FILE = re.compile(
    r"^(?P<kind>sp|spiral|mea|meander)(?P<index>\d+)-(?P<group>[HP])(?P<num>\d+)\.(?:jpg|jpeg|png)$",
    re.IGNORECASE,
)


def scan_handpd_tree(
    root: str | Path,
    default_cohort: str = "old_handpd",
    demographics: dict[str, dict] | None = None,
) -> list[dict]:
    """Emit manifest rows from a corpus tree with files named like
    ``sp1-H12.jpg`` / ``mea3-P4.jpg``.

    Cohort is inferred from any ancestor directory containing "new" or
    "old"; demographics (age/gender/handedness per patient id) come from
    the optional mapping and are left blank otherwise, to be filled in
    before the manifest will load.
    """
    root = Path(root)
    rows = []
    for path in sorted(root.rglob("*")):
        if not path.is_file():
            continue
        m = _HANDPD_FILE.match(path.name)
        if not m:
            continue
        cohort = default_cohort
        for part in path.relative_to(root).parts[:-1]:
            low = part.lower()
            if "new" in low:
                cohort = "new_handpd"
            elif "old" in low:
                cohort = "old_handpd"
        group = m.group("group").upper()
        pid = f"{cohort.split('_')[0]}-{group}{int(m.group('num'))}"
        demo = (demographics or {}).get(pid, {})
        rows.append(
            {
                "patient_id": pid,
                "age": demo.get("age", ""),
                "gender": demo.get("gender", ""),
                "handedness": demo.get("handedness", ""),
                "label": "healthy" if group == "H" else "pd",
                "cohort": cohort,
                "kind": "spiral" if m.group("kind").lower().startswith("sp") else "meander",
                "index": int(m.group("index")),
                "image_path": str(path),
            }
        )
    rows.sort(key=lambda r: (r["patient_id"], r["kind"], r["index"]))
    return rows


def write_manifest_csv(rows: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in MANIFEST_COLUMNS})
