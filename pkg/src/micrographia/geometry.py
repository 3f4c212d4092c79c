"""Radial profiling of trace pairs.

Every tremor feature consumes pairs of radii (r_ht, r_et): distances from
a shared center to the handwriting and exam traces at matching angles.
Spirals cross a ray several times, so distances inside one angular bin are
clustered into turns and matched innermost-to-innermost.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import BinaryMask, EmptyTraceError, TracePair

DEFAULT_N_ANGLES = 360
DEFAULT_TURN_GAP = 8.0


class DegenerateTraceError(ValueError):
    """Traces cover too little of the circle to profile radially."""


@dataclass(frozen=True)
class RadialProfile:
    """Matched radius samples ordered along the angular sweep.

    center is (x, y) in pixel coordinates; r_ht/r_et are the paired radii
    in pixels.  angle_index unwraps multi-turn figures: the k-th matched
    turn in bin b gets index b + k*n_angles, so consecutive samples are
    neighbors along the traced curve (first revolution completely, then
    the second, ...) and lagged features compare points of the same turn.
    """

    center: tuple[float, float]
    angle_index: np.ndarray
    r_ht: np.ndarray
    r_et: np.ndarray

    def __post_init__(self):
        if not (len(self.angle_index) == len(self.r_ht) == len(self.r_et)):
            raise ValueError("profile arrays must have equal length")
        if len(self.r_ht) == 0:
            raise ValueError("profile must contain at least one sample")
        for arr in (self.r_ht, self.r_et):
            if not np.isfinite(arr).all() or (arr < 0).any():
                raise ValueError("radii must be finite and non-negative")
        if (np.diff(self.angle_index) < 0).any():
            raise ValueError("samples must be sorted by angle_index")

    @property
    def n(self) -> int:
        return len(self.r_ht)


def estimate_center(et: BinaryMask) -> tuple[float, float]:
    """Centroid (mean x, mean y) of the exam-trace ink.

    The printed template is noise-free, which makes it the stable choice
    of center; a tremulous pen stroke would bias its own centroid.
    """
    coords = et.ink_coordinates()
    if len(coords) == 0:
        raise EmptyTraceError("cannot estimate center of an empty trace")
    cy, cx = coords.mean(axis=0)
    return float(cx), float(cy)


def _bin_distances(mask: BinaryMask, center, n_angles: int):
    """Sorted ink-pixel distances per angular bin."""
    cx, cy = center
    coords = mask.ink_coordinates()
    dx = coords[:, 1] - cx
    dy = coords[:, 0] - cy
    r = np.hypot(dx, dy)
    theta = np.mod(np.arctan2(dy, dx), 2.0 * np.pi)
    bins = np.minimum(
        (theta / (2.0 * np.pi / n_angles)).astype(int), n_angles - 1
    )
    out = [None] * n_angles
    order = np.lexsort((r, bins))
    bins, r = bins[order], r[order]
    starts = np.searchsorted(bins, np.arange(n_angles), side="left")
    ends = np.searchsorted(bins, np.arange(n_angles), side="right")
    for b in range(n_angles):
        if ends[b] > starts[b]:
            out[b] = r[starts[b] : ends[b]]
    return out


def _cluster_turns(sorted_r: np.ndarray, gap: float) -> list[float]:
    """Mean distance of each turn; a jump larger than ``gap`` starts a new
    turn, innermost first."""
    splits = np.nonzero(np.diff(sorted_r) > gap)[0] + 1
    return [float(chunk.mean()) for chunk in np.split(sorted_r, splits)]


def _nearest_populated(turns_by_bin, i: int, n: int, step: int):
    """First bin at offset 1..n-1 from i (direction ``step``) with turns."""
    for d in range(1, n):
        j = (i + step * d) % n
        if turns_by_bin[j] is not None:
            return j, d
    return None, None


def radial_profile(
    pair: TracePair,
    n_angles: int = DEFAULT_N_ANGLES,
    turn_gap: float = DEFAULT_TURN_GAP,
) -> RadialProfile:
    """Sample matched (r_ht, r_et) radii over uniform angular bins.

    Within a bin, each trace's pixel distances are clustered into turns
    and the k-th innermost turns are paired; unmatched extra turns are
    dropped.  A bin where only one trace appears gets the other trace
    filled in by linear interpolation between its nearest populated
    angular neighbors (wrapping around the circle).
    """
    if n_angles < 8:
        raise ValueError(f"n_angles must be >= 8, got {n_angles}")
    et, ht = pair.exam_trace, pair.handwriting_trace
    if et.ink_count == 0 or ht.ink_count == 0:
        raise EmptyTraceError(f"empty trace in pair {pair.source_id!r}")

    center = estimate_center(et)
    et_bins = _bin_distances(et, center, n_angles)
    ht_bins = _bin_distances(ht, center, n_angles)

    for name, dist_bins in (("exam", et_bins), ("handwriting", ht_bins)):
        populated = sum(1 for d in dist_bins if d is not None)
        if populated < n_angles / 2:
            raise DegenerateTraceError(
                f"{name} trace of {pair.source_id!r} populates only "
                f"{populated}/{n_angles} angular bins"
            )

    et_turns = [None if d is None else _cluster_turns(d, turn_gap) for d in et_bins]
    ht_turns = [None if d is None else _cluster_turns(d, turn_gap) for d in ht_bins]

    matched: list[tuple[int, float, float]] = []
    for b in range(n_angles):
        et_t, ht_t = et_turns[b], ht_turns[b]
        if et_t is None and ht_t is None:
            continue
        if et_t is None:
            et_t = _interpolated_turns(et_turns, b, n_angles, len(ht_t))
        elif ht_t is None:
            ht_t = _interpolated_turns(ht_turns, b, n_angles, len(et_t))
        for k, (r_h, r_e) in enumerate(zip(ht_t, et_t)):
            matched.append((b + k * n_angles, r_h, r_e))

    matched.sort(key=lambda s: s[0])
    return RadialProfile(
        center=center,
        angle_index=np.array([s[0] for s in matched], dtype=int),
        r_ht=np.array([s[1] for s in matched], dtype=float),
        r_et=np.array([s[2] for s in matched], dtype=float),
    )


def _interpolated_turns(turns_by_bin, b: int, n_angles: int, want: int) -> list[float]:
    """Per-turn radii for empty bin ``b``, linear in angle between the
    nearest populated neighbors on either side."""
    j1, d1 = _nearest_populated(turns_by_bin, b, n_angles, -1)
    j2, d2 = _nearest_populated(turns_by_bin, b, n_angles, +1)
    prev_t, next_t = turns_by_bin[j1], turns_by_bin[j2]
    k_max = min(want, len(prev_t), len(next_t))
    return [
        (prev_t[k] * d2 + next_t[k] * d1) / (d1 + d2) for k in range(k_max)
    ]


def write_profile_csv(profile: RadialProfile, path: str | Path) -> None:
    """Debug dump, one row per sample."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["angle_index", "r_ht", "r_et"])
        for a, rh, re_ in zip(profile.angle_index, profile.r_ht, profile.r_et):
            writer.writerow([int(a), repr(float(rh)), repr(float(re_))])
