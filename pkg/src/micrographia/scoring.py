"""Image-to-verdict scoring against a loaded model artifact.

Shared by the HTTP service and the CLI predictor: each image runs the
trace-extraction and feature pipeline independently, failures are carried
per image instead of aborting the exam, and the surviving probabilities
aggregate into one patient verdict.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .evaluation import aggregate_patient
from .features import FEATURE_NAMES, compute_raw_features, normalize
from .geometry import DegenerateTraceError, radial_profile
from .imaging import EmptyTraceError, RasterImage, extract_trace_pair
from .models import LABEL_PD, ModelArtifact

MIN_CONFIDENT_IMAGES = 6


@dataclass(frozen=True)
class ImageScore:
    kind: str
    probability: Optional[float]
    label: Optional[int]
    error: Optional[str]

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class ExamOutcome:
    per_image: tuple[ImageScore, ...]
    verdict: int
    verdict_probability: float
    low_confidence: bool

    @property
    def scored_probabilities(self) -> list[float]:
        return [s.probability for s in self.per_image if s.ok]


def score_image(
    artifact: ModelArtifact,
    image: RasterImage,
    age: float,
    gender: int,
    kind: str = "spiral",
) -> ImageScore:
    """Probability of PD for one drawing; failures become the error field."""
    try:
        pair = extract_trace_pair(image)
        profile = radial_profile(pair)
        raw = compute_raw_features(
            profile,
            d=artifact.neighbor_offset,
            centered_std=artifact.centered_std,
        )
    except EmptyTraceError:
        return ImageScore(kind=kind, probability=None, label=None, error="empty trace")
    except DegenerateTraceError:
        return ImageScore(kind=kind, probability=None, label=None, error="degenerate trace")
    except ValueError as exc:
        return ImageScore(kind=kind, probability=None, label=None, error=str(exc))
    values = np.concatenate(
        [normalize(raw, artifact.normalization), [float(age), float(gender)]]
    )
    prob = float(artifact.predict_proba(values[None, :])[0])
    label = int(prob >= artifact.threshold)
    return ImageScore(kind=kind, probability=prob, label=label, error=None)


def score_exam(
    artifact: ModelArtifact,
    images: Sequence[tuple[str, RasterImage]],
    age: float,
    gender: int,
    scheme: str = "c",
) -> ExamOutcome:
    """Score every image and aggregate the successes into a verdict.

    Raises ValueError when no image survives extraction; callers decide
    how to surface that (the service maps it to 422).
    """
    scores = tuple(
        score_image(artifact, img, age, gender, kind) for kind, img in images
    )
    probs = [s.probability for s in scores if s.ok]
    if not probs:
        raise ValueError("every image failed trace extraction")
    verdict = aggregate_patient(probs, scheme=scheme, threshold=artifact.threshold)
    return ExamOutcome(
        per_image=scores,
        verdict=verdict,
        verdict_probability=float(np.mean(probs)),
        low_confidence=len(probs) < MIN_CONFIDENT_IMAGES,
    )
