"""Screening for Parkinson's-style tremor from photographed drawing exams.

Pipeline: decode exam photos, separate the printed guide from the pen
stroke, profile both radially around a shared center, compute tremor
features, classify with an RBF-kernel SVM or elastic-net logistic
regression, and aggregate image predictions into a patient verdict.
"""

__version__ = "0.1.0"
