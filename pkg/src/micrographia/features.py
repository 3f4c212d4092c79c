"""Tremor features computed from a radial profile.

Nine scalar features summarize how far the pen stroke wanders from the
printed guide.  F1-F4 and F9 work on the per-sample radius differences
(r_ht - r_et); F5-F8 work on the lagged relative-tremor series, which
compares the guide radius at one angle against the stroke radius several
samples earlier.

Two conventions are deliberate and load-bearing:

* F4 and F8 divide the raw (uncentered) sum of squares by N - 1; no mean
  is subtracted.  ``centered_std=True`` switches both to the conventional
  centered estimator for sensitivity analysis.
* F5 sums N - D + 1 relative-tremor terms but divides by N - D.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import RadialProfile

DEFAULT_NEIGHBOR_OFFSET = 10
NEIGHBOR_OFFSET_SWEEP = (1, 3, 5, 7, 10, 15, 20)

FEATURE_NAMES = (
    "f1_rms",
    "f2_max_diff",
    "f3_min_diff",
    "f4_std_diff",
    "f5_mrt",
    "f6_max_rt",
    "f7_min_rt",
    "f8_std_rt",
    "f9_sign_changes",
)

GENDER_MALE = 0
GENDER_FEMALE = 1


class ZeroVarianceError(ValueError):
    """A feature column has no variance on the training split."""


@dataclass(frozen=True)
class RawFeatures:
    f1_rms: float
    f2_max_diff: float
    f3_min_diff: float
    f4_std_diff: float
    f5_mrt: float
    f6_max_rt: float
    f7_min_rt: float
    f8_std_rt: float
    f9_sign_changes: int
    d: int = DEFAULT_NEIGHBOR_OFFSET

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.f1_rms,
                self.f2_max_diff,
                self.f3_min_diff,
                self.f4_std_diff,
                self.f5_mrt,
                self.f6_max_rt,
                self.f7_min_rt,
                self.f8_std_rt,
                float(self.f9_sign_changes),
            ],
            dtype=float,
        )


@dataclass(frozen=True)
class NormalizationStats:
    """Per-feature mean and sample standard deviation of the training split."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if self.mean.shape != (len(FEATURE_NAMES),) or self.std.shape != self.mean.shape:
            raise ValueError("stats must cover exactly the 9 features")
        if not (self.std > 0).all():
            raise ValueError("every retained feature needs std > 0")


@dataclass(frozen=True)
class FeatureVector:
    """Classifier input: 9 normalized features, then age and gender."""

    values: np.ndarray
    patient_id: str = ""
    drawing_kind: str = "spiral"
    label: Optional[int] = None  # 1 = pd, 0 = healthy

    def __post_init__(self):
        if self.values.shape != (11,):
            raise ValueError(f"expected 11 values, got shape {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise ValueError("feature values must be finite")
        if self.values[10] not in (GENDER_MALE, GENDER_FEMALE):
            raise ValueError("gender must be 0 (male) or 1 (female)")
        if self.values[9] <= 0:
            raise ValueError("age must be positive")


def diff_series(profile: RadialProfile) -> np.ndarray:
    """Signed per-sample differences r_ht - r_et."""
    return profile.r_ht - profile.r_et


def f1_rms(diffs: Sequence[float]) -> float:
    d = _as_series(diffs, "f1")
    return float(np.sqrt(np.mean(np.square(d))))


def f2_max_abs(diffs: Sequence[float]) -> float:
    return float(np.max(np.abs(_as_series(diffs, "f2"))))


def f3_min_abs(diffs: Sequence[float]) -> float:
    return float(np.min(np.abs(_as_series(diffs, "f3"))))


def f4_std(diffs: Sequence[float], centered: bool = False) -> float:
    d = _as_series(diffs, "f4")
    if len(d) < 2:
        raise ValueError("f4 needs at least 2 samples")
    if centered:
        return float(np.std(d, ddof=1))
    return float(np.sqrt(np.sum(np.square(d)) / (len(d) - 1)))


def relative_tremor_series(profile: RadialProfile, d: int) -> np.ndarray:
    """|r_et[i] - r_ht[i-d+1]| for i = d..N (1-based); length N - d + 1."""
    if d < 1:
        raise ValueError(f"offset d must be >= 1, got {d}")
    n = profile.n
    if n <= d:
        raise ValueError(f"profile has {n} samples, need more than d={d}")
    i = np.arange(d - 1, n)
    return np.abs(profile.r_et[i] - profile.r_ht[i - d + 1])


def f5_mrt(profile: RadialProfile, d: int = DEFAULT_NEIGHBOR_OFFSET) -> float:
    """Mean relative tremor: the lagged-difference sum divided by N - d
    (one less than the number of terms; kept exactly as defined)."""
    rt = relative_tremor_series(profile, d)
    return float(np.sum(rt) / (profile.n - d))


def f6_f7_f8(rt_series: Sequence[float], centered: bool = False) -> tuple[float, float, float]:
    """(max, min, std) of the relative-tremor series; std follows the same
    uncentered N-1 convention as f4."""
    rt = _as_series(rt_series, "f6/f7/f8")
    if len(rt) < 2:
        raise ValueError("relative-tremor std needs at least 2 values")
    if centered:
        std = float(np.std(rt, ddof=1))
    else:
        std = float(np.sqrt(np.sum(np.square(rt)) / (len(rt) - 1)))
    return float(np.max(rt)), float(np.min(rt)), std


def f9_sign_changes(diffs: Sequence[float]) -> int:
    """Transitions of the difference series from positive to non-positive.

    A zero ends a positive run and counts as a transition; runs that never
    go positive contribute nothing.
    """
    d = _as_series(diffs, "f9")
    return int(np.sum((d[:-1] > 0) & (d[1:] <= 0)))


def compute_raw_features(
    profile: RadialProfile,
    d: int = DEFAULT_NEIGHBOR_OFFSET,
    centered_std: bool = False,
) -> RawFeatures:
    diffs = diff_series(profile)
    rt = relative_tremor_series(profile, d)
    f6, f7, f8 = f6_f7_f8(rt, centered=centered_std)
    return RawFeatures(
        f1_rms=f1_rms(diffs),
        f2_max_diff=f2_max_abs(diffs),
        f3_min_diff=f3_min_abs(diffs),
        f4_std_diff=f4_std(diffs, centered=centered_std),
        f5_mrt=f5_mrt(profile, d),
        f6_max_rt=f6,
        f7_min_rt=f7,
        f8_std_rt=f8,
        f9_sign_changes=f9_sign_changes(diffs),
        d=d,
    )


def fit_normalization(feature_rows: np.ndarray) -> NormalizationStats:
    """Mean and sample std per feature column, training rows only."""
    rows = np.asarray(feature_rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != len(FEATURE_NAMES):
        raise ValueError(f"expected (n, 9) feature rows, got {rows.shape}")
    if rows.shape[0] < 2:
        raise ValueError("need at least 2 training rows to fit normalization")
    mean = rows.mean(axis=0)
    std = rows.std(axis=0, ddof=1)
    for i, s in enumerate(std):
        if s <= 0:
            raise ZeroVarianceError(
                f"feature {FEATURE_NAMES[i]} has zero variance on the training split"
            )
    return NormalizationStats(mean=mean, std=std)


def normalize(raw: RawFeatures, stats: NormalizationStats) -> np.ndarray:
    """(f - mean) / std, independently per feature."""
    return (raw.as_array() - stats.mean) / stats.std


def build_feature_vector(
    raw: RawFeatures,
    stats: NormalizationStats,
    age: float,
    gender: int,
    patient_id: str = "",
    drawing_kind: str = "spiral",
    label: Optional[int] = None,
) -> FeatureVector:
    values = np.concatenate([normalize(raw, stats), [float(age), float(gender)]])
    return FeatureVector(
        values=values,
        patient_id=patient_id,
        drawing_kind=drawing_kind,
        label=label,
    )


def _as_series(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or len(arr) == 0:
        raise ValueError(f"{name} needs a non-empty 1-d series")
    return arr


# ---------------------------------------------------------------------------
# Image-level feature table (features.csv)
# ---------------------------------------------------------------------------

# One row per drawing, raw (unnormalized) features; normalization is fit
# later on the training split only.  The id prefix before '#' is the
# patient id, so patient-level grouping never needs a second file.
FEATURES_CSV_COLUMNS = ("id", "kind") + FEATURE_NAMES + ("age", "gender", "label")


@dataclass(frozen=True)
class FeatureRow:
    image_id: str
    patient_id: str
    kind: str
    raw: np.ndarray
    age: float
    gender: int
    label: Optional[int] = None

    def __post_init__(self):
        if self.raw.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected 9 raw features, got {self.raw.shape}")


def make_image_id(patient_id: str, kind: str, index: int) -> str:
    if "#" in patient_id:
        raise ValueError(f"patient id may not contain '#': {patient_id!r}")
    return f"{patient_id}#{kind}{index}"


def write_features_csv(rows: Sequence[FeatureRow], path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FEATURES_CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [row.image_id, row.kind]
                + [format(v, ".17g") for v in row.raw]
                + [format(row.age, ".17g"), row.gender, _label_str(row.label)]
            )


def read_features_csv(path) -> list[FeatureRow]:
    import csv

    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != FEATURES_CSV_COLUMNS:
            raise ValueError(
                f"features header must be {','.join(FEATURES_CSV_COLUMNS)}, "
                f"got {reader.fieldnames}"
            )
        for rec in reader:
            image_id = rec["id"]
            patient_id = image_id.split("#", 1)[0]
            label = rec["label"].strip()
            rows.append(
                FeatureRow(
                    image_id=image_id,
                    patient_id=patient_id,
                    kind=rec["kind"],
                    raw=np.array([float(rec[n]) for n in FEATURE_NAMES]),
                    age=float(rec["age"]),
                    gender=int(rec["gender"]),
                    label=_label_int(label),
                )
            )
    return rows


def _label_str(label: Optional[int]) -> str:
    if label is None:
        return ""
    return "pd" if label == 1 else "healthy"


def _label_int(label: str) -> Optional[int]:
    if not label:
        return None
    if label not in ("pd", "healthy"):
        raise ValueError(f"unknown label {label!r}")
    return 1 if label == "pd" else 0


def fit_normalization_rows(rows: Sequence[FeatureRow]) -> NormalizationStats:
    return fit_normalization(np.stack([r.raw for r in rows]))


def design_matrix(rows: Sequence[FeatureRow], stats: NormalizationStats):
    """(X, y) classifier inputs for feature rows; y is None when any row
    is unlabeled."""
    x = np.stack(
        [
            np.concatenate(
                [(r.raw - stats.mean) / stats.std, [float(r.age), float(r.gender)]]
            )
            for r in rows
        ]
    )
    labels = [r.label for r in rows]
    y = None if any(l is None for l in labels) else np.array(labels, dtype=int)
    return x, y
