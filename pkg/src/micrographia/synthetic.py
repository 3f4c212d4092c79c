"""Synthetic drawing exams with controllable tremor.

Renders a guide figure the way the printable template does, then a pen
trace that follows the guide with a band-limited radial perturbation.
Low amplitudes imitate steady tracing, high amplitudes the oscillation
the tremor features are designed to pick up.  Everything is driven by a
seeded generator so fixtures are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataset
from .imaging import (
    RasterImage,
    encode_png,
    meander_path_points,
    save_image,
    spiral_path_points,
    stamp_path,
)

# Pen color sits between the two cutoffs: every channel below 200 so the
# handwriting threshold keeps it, blue above 90 so the exam threshold
# drops it.  The page matches the printable template's light gray, which
# keeps blurred guide edges below the exam cutoff; on a white page the
# guide's edge pixels land between the two cutoffs and leak into the
# handwriting mask as a halo.
PEN_COLOR = (100, 100, 190)
GUIDE_COLOR = (0, 0, 0)
PAGE_COLOR = (212, 212, 212)

LOW_TREMOR_AMPLITUDE = 1.0
HIGH_TREMOR_AMPLITUDE = 8.0


@dataclass(frozen=True)
class ExamSpec:
    size: int = 360
    # A tight 3-turn spiral keeps the ink centroid (the estimated center)
    # close to the figure center, which keeps inner-turn matching clean.
    inner_radius: float = 45.0
    outer_radius: float = 142.0
    turns: float = 3.0
    meander_gap: float = 46.0
    guide_width: int = 5
    pen_width: int = 4
    # A tracer never sits exactly on the line; the systematic offset also
    # keeps a steady pen stroke from vanishing under the dilated guide
    # when the difference step subtracts everything the guide explains.
    pen_offset: float = 9.0
    tremor_cycles: tuple[int, int] = (5, 9)  # oscillations per revolution


def _guide_points(kind: str, spec: ExamSpec):
    c = spec.size / 2.0
    if kind == "spiral":
        b = (spec.outer_radius - spec.inner_radius) / (2.0 * np.pi * spec.turns)
        return spiral_path_points(c, c, spec.inner_radius, b, spec.turns)
    if kind == "meander":
        return meander_path_points(c, c, spec.outer_radius * 0.85, spec.meander_gap)
    raise ValueError(f"unknown drawing kind {kind!r}")


def _radial_perturbation(
    theta: np.ndarray, amplitude: float, rng, cycles: tuple[int, int]
) -> np.ndarray:
    lo, hi = cycles
    f1 = int(rng.integers(lo, hi + 1))
    f2 = f1 + int(rng.integers(2, 5))
    phi1, phi2 = rng.uniform(0, 2 * np.pi, size=2)
    wave = np.sin(f1 * theta + phi1) + 0.4 * np.sin(f2 * theta + phi2)
    return amplitude * wave / 1.4  # peak roughly equals the amplitude


def render_exam(
    kind: str,
    amplitude: float,
    rng: np.random.Generator,
    spec: ExamSpec = ExamSpec(),
) -> RasterImage:
    """One exam photo: guide figure plus a tremulous pen trace over it."""
    img = RasterImage.filled(spec.size, spec.size, PAGE_COLOR)
    xs, ys = _guide_points(kind, spec)
    stamp_path(img.pixels, xs, ys, spec.guide_width, GUIDE_COLOR)

    c = spec.size / 2.0
    dx, dy = xs - c, ys - c
    r = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    # Spirals sweep theta monotonically; use the unwrapped angle so the
    # perturbation is continuous along the stroke rather than by ray.
    t_cont = np.unwrap(theta)
    noise = _radial_perturbation(t_cont, amplitude, rng, spec.tremor_cycles)
    r_pen = np.maximum(r + spec.pen_offset + noise, 1.0)
    pen_x = c + r_pen * np.cos(theta)
    pen_y = c + r_pen * np.sin(theta)
    stamp_path(img.pixels, pen_x, pen_y, spec.pen_width, PEN_COLOR)
    return img


@dataclass(frozen=True)
class SyntheticPatient:
    patient_id: str
    label: int  # 1 = high tremor (pd-like), 0 = low
    age: float
    gender: int
    images: tuple[tuple[str, RasterImage], ...]  # (kind, image)


def synthetic_cohort(
    n_low: int,
    n_high: int,
    images_per_patient: int = 4,
    kinds: tuple[str, ...] = ("spiral",),
    seed: int = 0,
    low_amplitude: float = LOW_TREMOR_AMPLITUDE,
    high_amplitude: float = HIGH_TREMOR_AMPLITUDE,
    spec: ExamSpec = ExamSpec(),
    cohort_ages: bool = False,
) -> list[SyntheticPatient]:
    """Patients with ``images_per_patient`` drawings per kind.

    By default ages are drawn from one shared range for both groups, so
    tremor (not demographics) is the only separating signal.  With
    ``cohort_ages`` the groups instead mimic the screening cohort's age
    structure (healthy skewing younger), which is what a corpus-level
    benchmark should look like.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    patients = []
    specs = [(0, low_amplitude, i) for i in range(n_low)] + [
        (1, high_amplitude, i) for i in range(n_high)
    ]
    for label, amplitude, i in specs:
        pid = f"syn-{'high' if label else 'low'}-{i:03d}"
        images = []
        for kind in kinds:
            for _ in range(images_per_patient):
                images.append((kind, render_exam(kind, amplitude, rng, spec)))
        if cohort_ages:
            mean, sd = (58.8, 7.5) if label else (44.1, 15.5)
            age = float(np.clip(rng.normal(mean, sd), 25.0, 85.0))
        else:
            age = float(rng.uniform(40.0, 70.0))
        patients.append(
            SyntheticPatient(
                patient_id=pid,
                label=label,
                age=age,
                gender=int(rng.integers(0, 2)),
                images=tuple(images),
            )
        )
    return patients


def write_synthetic_corpus(
    out_dir: str | Path,
    n_low: int,
    n_high: int,
    seed: int = 0,
    low_amplitude: float = LOW_TREMOR_AMPLITUDE,
    high_amplitude: float = HIGH_TREMOR_AMPLITUDE,
    spec: ExamSpec = ExamSpec(),
) -> Path:
    """Render a full manifest-loadable corpus (4 spirals + 4 meanders per
    patient) and return the manifest path."""
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    patients = synthetic_cohort(
        n_low,
        n_high,
        images_per_patient=4,
        kinds=("spiral", "meander"),
        seed=seed,
        low_amplitude=low_amplitude,
        high_amplitude=high_amplitude,
        spec=spec,
        cohort_ages=True,
    )
    rows = []
    for p in patients:
        counters: dict[str, int] = {}
        for kind, img in p.images:
            counters[kind] = counters.get(kind, 0) + 1
            name = f"{p.patient_id}-{kind}{counters[kind]}.png"
            save_image(img, images_dir / name)
            rows.append(
                {
                    "patient_id": p.patient_id,
                    "age": format(p.age, ".1f"),
                    "gender": "female" if p.gender == 1 else "male",
                    "handedness": "right",
                    "label": "pd" if p.label == 1 else "healthy",
                    "cohort": "old_handpd",
                    "kind": kind,
                    "index": counters[kind],
                    "image_path": str(Path("images") / name),
                }
            )
    manifest_path = out_dir / "manifest.csv"
    dataset.write_manifest_csv(rows, manifest_path)
    return manifest_path


def exam_png_bytes(kind: str, amplitude: float, seed: int, spec: ExamSpec = ExamSpec()) -> bytes:
    """Single encoded exam image (service-test fixture helper)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return encode_png(render_exam(kind, amplitude, rng, spec))
