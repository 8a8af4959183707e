"""Class-and-distribution balancer: per-class training weights.

For training counts TR and held-out counts TE over the same class set, with
MC the largest training count:

    DTC(C) = TE(C) / TR(C)        # replicate the held-out distribution
    ITC(C) = MC / TR(C)           # inverse training frequency
    weight(C) = DTC(C) * ITC(C) = TE(C) * MC / TR(C)**2

All arithmetic is exact (fractions); floats appear only when rendering.
The literal alternating reading of the recipe, weight(C) = TE(C) / MC,
performs no class balancing but is kept behind ``literal=True`` for
auditing.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Hashable, Mapping, Sequence

from .errors import ConstraintViolation


class NormalizeMode(Enum):
    NONE = "none"
    MEAN_ONE = "mean-one"
    MAX_ONE = "max-one"

    @classmethod
    def parse(cls, text: str) -> "NormalizeMode":
        return cls(text.strip().lower().replace("_", "-"))


@dataclass(frozen=True)
class ClassWeights:
    """Strictly positive per-class multipliers, kept as exact fractions."""

    weights: dict[Hashable, Fraction]

    def __post_init__(self) -> None:
        for cls_, w in self.weights.items():
            if w <= 0:
                raise ConstraintViolation(f"weight for class {cls_} is not positive: {w}")

    def as_float(self, cls_: Hashable) -> float:
        return float(self.weights[cls_])

    def float_map(self) -> dict[Hashable, float]:
        return {c: float(w) for c, w in self.weights.items()}

    def vector(self, class_order: Sequence[Hashable]) -> list[float]:
        """Weights as floats in a fixed class-axis order (loss-boundary form)."""
        return [float(self.weights[c]) for c in class_order]

    def to_json(self) -> dict:
        def key(c: Hashable) -> str:
            return str(c)

        return {
            "weights": {key(c): float(w) for c, w in self.weights.items()},
            "fractions": {key(c): f"{w.numerator}/{w.denominator}" for c, w in self.weights.items()},
        }


def balancer_weights(
    train: Mapping[Hashable, int],
    test: Mapping[Hashable, int],
    literal: bool = False,
) -> ClassWeights:
    """Weights from training and held-out class counts.

    Both maps must cover exactly the same classes, every count >= 1.
    """
    if set(train) != set(test):
        only_train = sorted(str(c) for c in set(train) - set(test))
        only_test = sorted(str(c) for c in set(test) - set(train))
        missing = only_train + only_test
        raise ConstraintViolation(
            f"class sets differ between train and test: {', '.join(missing)}"
        )
    if not train:
        raise ConstraintViolation("no classes given")
    for side, counts in (("train", train), ("test", test)):
        for cls_, n in counts.items():
            if n < 1:
                raise ConstraintViolation(f"{side} count for class {cls_} must be >= 1, got {n}")

    mc = max(train.values())
    weights: dict[Hashable, Fraction] = {}
    for cls_ in train:
        if literal:
            weights[cls_] = Fraction(test[cls_], mc)
        else:
            dtc = Fraction(test[cls_], train[cls_])
            itc = Fraction(mc, train[cls_])
            weights[cls_] = dtc * itc
    return ClassWeights(weights)


def normalize_weights(w: ClassWeights, mode: NormalizeMode) -> ClassWeights:
    """Rescale weights; relative ratios are preserved exactly."""
    if mode is NormalizeMode.NONE:
        return w
    values = list(w.weights.values())
    if mode is NormalizeMode.MEAN_ONE:
        scale = Fraction(len(values), 1) / sum(values)
    elif mode is NormalizeMode.MAX_ONE:
        scale = 1 / max(values)
    else:  # pragma: no cover - enum is closed
        raise ConstraintViolation(f"unknown normalize mode {mode}")
    return ClassWeights({c: v * scale for c, v in w.weights.items()})
