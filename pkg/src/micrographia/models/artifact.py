"""Trained-model persistence and the shared prediction surface.

An artifact bundles everything prediction needs: the classifier, the
normalization statistics it was fit with, the operating threshold, the
feature-extraction settings, and enough provenance (training patients,
manifest hash, seed) for downstream leakage checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..features import NormalizationStats
from .logreg import LogRegModel, sigmoid
from .svm import SvmModel

FORMAT_MARKER = "micrographia-model"
FORMAT_VERSION = 1

LABEL_HEALTHY = 0
LABEL_PD = 1

_PROB_EPS = 1e-15

Model = Union[SvmModel, LogRegModel]


class ArtifactError(ValueError):
    """Serialization payload is corrupt, incompatible, or incomplete."""


def predict_proba(model: Model, x: np.ndarray) -> np.ndarray:
    """Probability of PD per row of x, strictly inside (0, 1)."""
    if isinstance(model, SvmModel):
        z = model.platt_a * model.decision_function(x) + model.platt_b
    elif isinstance(model, LogRegModel):
        z = model.decision_function(x)
    else:
        raise TypeError(f"not a trained model: {type(model).__name__}")
    return np.clip(sigmoid(z), _PROB_EPS, 1.0 - _PROB_EPS)


def predict_label(model: Model, x: np.ndarray, threshold: float | None = None) -> np.ndarray:
    """PD iff probability >= threshold; the tie goes to PD because a
    screening miss costs more than a false alarm."""
    t = model.threshold if threshold is None else threshold
    if not 0.0 < t < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {t}")
    return (predict_proba(model, x) >= t).astype(int)


@dataclass(frozen=True)
class ModelArtifact:
    kind: str  # "svm" | "logreg"
    model: Model
    normalization: NormalizationStats
    threshold: float
    neighbor_offset: int = 10
    centered_std: bool = False
    train_patient_ids: tuple[str, ...] = ()
    manifest_hash: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("svm", "logreg"):
            raise ArtifactError(f"unknown model kind {self.kind!r}")
        if not isinstance(self.normalization, NormalizationStats):
            raise ArtifactError("artifact requires normalization statistics")
        if not 0.0 < self.threshold < 1.0:
            raise ArtifactError(f"threshold must be in (0, 1), got {self.threshold}")

    @property
    def model_version(self) -> str:
        return f"{self.kind}-v{FORMAT_VERSION}-{self.manifest_hash[:12] or 'adhoc'}"

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return predict_proba(self.model, x)

    def predict_label(self, x: np.ndarray) -> np.ndarray:
        return predict_label(self.model, x, self.threshold)


def serialize_model(artifact: ModelArtifact) -> bytes:
    """Versioned, self-describing JSON payload; byte-stable for equal inputs."""
    if artifact.kind == "svm":
        m: SvmModel = artifact.model
        model_doc = {
            "support_vectors": m.support_vectors.tolist(),
            "dual_coef": m.dual_coef.tolist(),
            "bias": m.bias,
            "gamma": m.gamma,
            "c": m.c,
            "class_weights": {str(k): v for k, v in m.class_weights.items()},
            "platt_a": m.platt_a,
            "platt_b": m.platt_b,
            "converged": m.converged,
            "kkt_violation": m.kkt_violation,
        }
    else:
        lr: LogRegModel = artifact.model
        model_doc = {
            "weights": lr.weights.tolist(),
            "c": lr.c,
            "l1_ratio": lr.l1_ratio,
            "class_weights": None
            if lr.class_weights is None
            else {str(k): v for k, v in lr.class_weights.items()},
            "converged": lr.converged,
            "n_epochs": lr.n_epochs,
        }
    doc = {
        "format": FORMAT_MARKER,
        "version": FORMAT_VERSION,
        "kind": artifact.kind,
        "threshold": artifact.threshold,
        "neighbor_offset": artifact.neighbor_offset,
        "centered_std": artifact.centered_std,
        "train_patient_ids": list(artifact.train_patient_ids),
        "manifest_hash": artifact.manifest_hash,
        "seed": artifact.seed,
        "normalization": {
            "mean": artifact.normalization.mean.tolist(),
            "std": artifact.normalization.std.tolist(),
        },
        "model": model_doc,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def deserialize_model(data: bytes) -> ModelArtifact:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"corrupt model payload: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_MARKER:
        raise ArtifactError("corrupt model payload: missing format marker")
    if doc.get("version") != FORMAT_VERSION:
        raise ArtifactError(
            f"unsupported model version {doc.get('version')!r}, "
            f"expected {FORMAT_VERSION}"
        )
    norm_doc = doc.get("normalization")
    if not norm_doc or "mean" not in norm_doc or "std" not in norm_doc:
        raise ArtifactError("artifact is missing normalization statistics")
    try:
        normalization = NormalizationStats(
            mean=np.array(norm_doc["mean"], dtype=float),
            std=np.array(norm_doc["std"], dtype=float),
        )
        kind = doc["kind"]
        m = doc["model"]
        if kind == "svm":
            model: Model = SvmModel(
                support_vectors=np.array(m["support_vectors"], dtype=float),
                dual_coef=np.array(m["dual_coef"], dtype=float),
                bias=float(m["bias"]),
                gamma=float(m["gamma"]),
                c=float(m["c"]),
                class_weights={int(k): float(v) for k, v in m["class_weights"].items()},
                platt_a=float(m["platt_a"]),
                platt_b=float(m["platt_b"]),
                threshold=float(doc["threshold"]),
                converged=bool(m["converged"]),
                kkt_violation=float(m["kkt_violation"]),
            )
        elif kind == "logreg":
            model = LogRegModel(
                weights=np.array(m["weights"], dtype=float),
                c=float(m["c"]),
                l1_ratio=float(m["l1_ratio"]),
                class_weights=None
                if m["class_weights"] is None
                else {int(k): float(v) for k, v in m["class_weights"].items()},
                threshold=float(doc["threshold"]),
                converged=bool(m["converged"]),
                n_epochs=int(m["n_epochs"]),
            )
        else:
            raise ArtifactError(f"unknown model kind {kind!r}")
        return ModelArtifact(
            kind=kind,
            model=model,
            normalization=normalization,
            threshold=float(doc["threshold"]),
            neighbor_offset=int(doc["neighbor_offset"]),
            centered_std=bool(doc["centered_std"]),
            train_patient_ids=tuple(doc["train_patient_ids"]),
            manifest_hash=str(doc["manifest_hash"]),
            seed=int(doc["seed"]),
        )
    except ArtifactError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"invalid model payload: {exc}") from None


def save_artifact(artifact: ModelArtifact, path) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_model(artifact))


def load_artifact(path) -> ModelArtifact:
    with open(path, "rb") as fh:
        return deserialize_model(fh.read())
