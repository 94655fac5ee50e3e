"""Fuzzy decision tree fusion of heterogeneous AI-generated-image detectors."""

from .scores import DetectorKind, DetectorMeta, Label, SampleRecord, ScoreMatrix, load_scores, sample_balanced
from .tree import FuzzyTree, Hyperparams, NodeConfig, Operator, grow, predict, predict_matrix

__all__ = [
    "DetectorKind",
    "DetectorMeta",
    "FuzzyTree",
    "Hyperparams",
    "Label",
    "NodeConfig",
    "Operator",
    "SampleRecord",
    "ScoreMatrix",
    "grow",
    "load_scores",
    "predict",
    "predict_matrix",
    "sample_balanced",
]

__version__ = "0.1.0"
