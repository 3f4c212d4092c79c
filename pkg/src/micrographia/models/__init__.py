"""Binary classifiers and their persistence format."""

from .artifact import (
    LABEL_HEALTHY,
    LABEL_PD,
    ArtifactError,
    ModelArtifact,
    deserialize_model,
    load_artifact,
    predict_label,
    predict_proba,
    save_artifact,
    serialize_model,
)
from .logreg import LogRegModel, sigmoid, train_logreg
from .svm import SvmModel, balanced_class_weights, rbf_kernel, rbf_kernel_matrix, scale_gamma, train_svm

__all__ = [
    "ArtifactError",
    "LABEL_HEALTHY",
    "LABEL_PD",
    "LogRegModel",
    "ModelArtifact",
    "SvmModel",
    "balanced_class_weights",
    "deserialize_model",
    "load_artifact",
    "predict_label",
    "predict_proba",
    "rbf_kernel",
    "rbf_kernel_matrix",
    "save_artifact",
    "scale_gamma",
    "serialize_model",
    "sigmoid",
    "train_logreg",
    "train_svm",
]
