"""Confusion-matrix evaluation: Jaccard index, precision, recall, F1.

Degenerate ratios follow fixed 0/0 -> 0 conventions so no fold can produce
NaN. Every ratio is computed as a single division of exact integer counts
(F1 as 2TP/(2TP+FP+FN)), which makes the single-label identities
micro precision = micro recall = micro F1 = accuracy hold bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ValidationError


class Averaging(Enum):
    PER_CLASS = "per_class"
    MICRO = "micro"
    MACRO = "macro"


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """CxC integer grid; rows are true classes, columns predicted classes."""

    counts: np.ndarray
    class_names: tuple[str, ...]

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, ConfusionMatrix)
            and self.class_names == other.class_names
            and np.array_equal(self.counts, other.counts)
        )

    def __post_init__(self) -> None:
        counts = self.counts
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ValidationError(f"confusion matrix must be square, got {counts.shape}")
        if len(self.class_names) != counts.shape[0]:
            raise ValidationError("class_names length must match matrix size")
        if (counts < 0).any():
            raise ValidationError("confusion matrix entries must be non-negative")

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def tp_fp_fn(self, c: int) -> tuple[int, int, int]:
        tp = int(self.counts[c, c])
        fp = int(self.counts[:, c].sum()) - tp
        fn = int(self.counts[c, :].sum()) - tp
        return tp, fp, fn

    def to_json(self) -> dict:
        return {
            "class_names": list(self.class_names),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ConfusionMatrix":
        return cls(
            counts=np.asarray(obj["counts"], dtype=np.int64),
            class_names=tuple(obj["class_names"]),
        )


def confusion(
    truth: Sequence[int], pred: Sequence[int], num_classes: int,
    class_names: Sequence[str] | None = None,
) -> ConfusionMatrix:
    """Count (true, predicted) pairs into a CxC grid."""
    if len(truth) != len(pred):
        raise ValidationError(f"length mismatch: {len(truth)} truths vs {len(pred)} predictions")
    if len(truth) == 0:
        raise ValidationError("cannot build a confusion matrix from zero samples")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    for t, p in zip(truth, pred):
        if not (0 <= t < num_classes and 0 <= p < num_classes):
            raise ValidationError(f"class index out of range: truth={t} pred={p} C={num_classes}")
        counts[t, p] += 1
    names = tuple(class_names) if class_names is not None else tuple(
        str(i) for i in range(num_classes)
    )
    return ConfusionMatrix(counts=counts, class_names=names)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def jaccard_per_class(cm: ConfusionMatrix) -> list[float]:
    """Per-class TP/(TP+FP+FN), 0 when the denominator is 0."""
    out = []
    for c in range(cm.num_classes):
        tp, fp, fn = cm.tp_fp_fn(c)
        out.append(_ratio(tp, tp + fp + fn))
    return out


def jaccard_macro(cm: ConfusionMatrix) -> float:
    """Macro-averaged Jaccard index, as a percentage."""
    if cm.total < 1:
        raise ValidationError("empty confusion matrix")
    per_class = jaccard_per_class(cm)
    return 100.0 * sum(per_class) / len(per_class)


def prf(cm: ConfusionMatrix, averaging: Averaging):
    """Precision/recall/F1 under the requested averaging.

    PER_CLASS returns a list of (precision, recall, f1) tuples; MICRO and
    MACRO return a single tuple.
    """
    if cm.total < 1:
        raise ValidationError("empty confusion matrix")
    per_class = []
    for c in range(cm.num_classes):
        tp, fp, fn = cm.tp_fp_fn(c)
        per_class.append(
            (
                _ratio(tp, tp + fp),
                _ratio(tp, tp + fn),
                _ratio(2 * tp, 2 * tp + fp + fn),
            )
        )
    if averaging is Averaging.PER_CLASS:
        return per_class
    if averaging is Averaging.MICRO:
        tp_sum = fp_sum = fn_sum = 0
        for c in range(cm.num_classes):
            tp, fp, fn = cm.tp_fp_fn(c)
            tp_sum += tp
            fp_sum += fp
            fn_sum += fn
        return (
            _ratio(tp_sum, tp_sum + fp_sum),
            _ratio(tp_sum, tp_sum + fn_sum),
            _ratio(2 * tp_sum, 2 * tp_sum + fp_sum + fn_sum),
        )
    if averaging is Averaging.MACRO:
        n = len(per_class)
        return tuple(sum(v[i] for v in per_class) / n for i in range(3))
    raise ValidationError(f"unknown averaging {averaging}")  # pragma: no cover


def accuracy(cm: ConfusionMatrix) -> float:
    return _ratio(int(np.trace(cm.counts)), cm.total)


@dataclass(frozen=True)
class EvaluationReport:
    """All metrics for one experiment run on one evaluation set."""

    confusion: ConfusionMatrix
    jaccard_macro_percent: float
    per_class: dict[str, dict[str, float]]
    micro: dict[str, float]
    macro: dict[str, float]

    def to_json(self) -> dict:
        return {
            "confusion": self.confusion.to_json(),
            "jaccard_macro_percent": self.jaccard_macro_percent,
            "per_class": self.per_class,
            "micro": self.micro,
            "macro": self.macro,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EvaluationReport":
        return cls(
            confusion=ConfusionMatrix.from_json(obj["confusion"]),
            jaccard_macro_percent=obj["jaccard_macro_percent"],
            per_class={k: dict(v) for k, v in obj["per_class"].items()},
            micro=dict(obj["micro"]),
            macro=dict(obj["macro"]),
        )


def evaluate(
    truth: Sequence[int], pred: Sequence[int], class_names: Sequence[str]
) -> EvaluationReport:
    """Build the full report for integer-coded predictions."""
    cm = confusion(truth, pred, len(class_names), class_names)
    return report_from_confusion(cm)


def report_from_confusion(cm: ConfusionMatrix) -> EvaluationReport:
    jac = jaccard_per_class(cm)
    per_class_prf = prf(cm, Averaging.PER_CLASS)
    micro_p, micro_r, micro_f1 = prf(cm, Averaging.MICRO)
    macro_p, macro_r, macro_f1 = prf(cm, Averaging.MACRO)
    per_class = {
        name: {
            "jaccard": jac[i],
            "precision": per_class_prf[i][0],
            "recall": per_class_prf[i][1],
            "f1": per_class_prf[i][2],
        }
        for i, name in enumerate(cm.class_names)
    }
    return EvaluationReport(
        confusion=cm,
        jaccard_macro_percent=jaccard_macro(cm),
        per_class=per_class,
        micro={"precision": micro_p, "recall": micro_r, "f1": micro_f1},
        macro={"precision": macro_p, "recall": macro_r, "f1": macro_f1},
    )


def render_report(report: EvaluationReport) -> str:
    """Human-readable block; percentages shown with 2 decimals."""
    lines = [
        f"Jaccard Similarity index: {report.jaccard_macro_percent:.2f}",
        f"Overall precision: {report.micro['precision']:.2f}",
        f"Overall recall: {report.micro['recall']:.2f}",
        f"Overall F1-score: {report.micro['f1']:.2f}",
        f"Macro F1-score: {report.macro['f1']:.2f}",
    ]
    for name, values in report.per_class.items():
        lines.append(
            f"  {name}: jaccard={100 * values['jaccard']:.2f} "
            f"precision={values['precision']:.2f} recall={values['recall']:.2f} "
            f"f1={values['f1']:.2f}"
        )
    return "\n".join(lines)


def report_to_json_str(report: EvaluationReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True)
