"""Desk-scale harness for imbalance-aware skin-lesion classification.

Pipeline pieces: multi-source manifest merging, stratified splits, the
class-and-distribution balancer, a from-scratch dense softmax classifier,
confusion-matrix metrics (Jaccard/F1), and the experiment runner with its
CLI (`harness`).
"""

from .balance import ClassWeights, NormalizeMode, balancer_weights, normalize_weights
from .manifest import (
    CombinedDataset,
    LesionClass,
    LESION_CLASS_ORDER,
    SampleRecord,
    Source,
    combine,
    group_label,
    parse_manifest,
)
from .metrics import ConfusionMatrix, EvaluationReport, confusion, evaluate, jaccard_macro, prf
from .splits import FoldSplit, stratified_holdout, stratified_kfold
from .harness import ExperimentConfig, Experiment, RunResult, run_experiment

__version__ = "0.1.0"

__all__ = [
    "ClassWeights",
    "NormalizeMode",
    "balancer_weights",
    "normalize_weights",
    "CombinedDataset",
    "LesionClass",
    "LESION_CLASS_ORDER",
    "SampleRecord",
    "Source",
    "combine",
    "group_label",
    "parse_manifest",
    "ConfusionMatrix",
    "EvaluationReport",
    "confusion",
    "evaluate",
    "jaccard_macro",
    "prf",
    "FoldSplit",
    "stratified_holdout",
    "stratified_kfold",
    "ExperimentConfig",
    "Experiment",
    "RunResult",
    "run_experiment",
    "__version__",
]
