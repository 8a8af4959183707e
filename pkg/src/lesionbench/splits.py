"""Stratified train/test partitions and k-fold splits.

Shuffling is driven by SplitMix64 (Vigna's reference algorithm), chosen
because it is trivially portable and has published reference outputs
(seed 0 -> 0xE220A8397B1DCDAF, ...; both vectors are frozen in the tests).
Within each class the sample indices are Fisher-Yates shuffled with one
shared stream, classes visited in sorted label order, then dealt
round-robin to folds: shuffled position i lands in test fold i mod k.
Bounded draws use modulo reduction, which keeps the construction portable;
the bias is irrelevant at desk scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Hashable, Sequence

from .errors import StratificationError, ValidationError
from .manifest import CombinedDataset

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 PRNG; 64-bit state, 64-bit output."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return (z ^ (z >> 31)) & _MASK64

    def bounded(self, n: int) -> int:
        """Uniform-ish draw in [0, n) by modulo reduction."""
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates, high index down."""
        for i in range(len(items) - 1, 0, -1):
            j = self.bounded(i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int


def _groups_in_order(labels: Sequence[Hashable]) -> list[tuple[str, list[int]]]:
    """Indices per label, keyed and sorted by the label's string form."""
    groups: dict[str, list[int]] = {}
    for idx, label in enumerate(labels):
        groups.setdefault(str(label), []).append(idx)
    return sorted(groups.items())


def stratified_kfold_indices(
    labels: Sequence[Hashable], k: int, seed: int
) -> list[list[int]]:
    """Assign each position in ``labels`` to exactly one test fold.

    Returns k index lists (ascending within each fold). Every label group
    needs at least k members.
    """
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    folds: list[list[int]] = [[] for _ in range(k)]
    rng = SplitMix64(seed)
    for label, indices in _groups_in_order(labels):
        if len(indices) < k:
            raise StratificationError(
                f"class {label} has {len(indices)} samples, fewer than k={k}"
            )
        shuffled = list(indices)
        rng.shuffle(shuffled)
        for pos, idx in enumerate(shuffled):
            folds[pos % k].append(idx)
    for fold in folds:
        fold.sort()
    return folds


def stratified_kfold(dataset: CombinedDataset, k: int, seed: int) -> list[FoldSplit]:
    """k stratified folds over the dataset's lesion classes.

    Deterministic per seed; per-class test counts across folds differ by
    at most one.
    """
    ids = dataset.ids()
    labels = [s.lesion_class for s in dataset.samples]
    fold_indices = stratified_kfold_indices(labels, k, seed)
    splits = []
    for fold_index, test_idx in enumerate(fold_indices):
        test_set = set(test_idx)
        splits.append(
            FoldSplit(
                fold_index=fold_index,
                train_ids=tuple(ids[i] for i in range(len(ids)) if i not in test_set),
                test_ids=tuple(ids[i] for i in test_idx),
                seed=seed,
            )
        )
    return splits


def stratified_holdout(
    dataset: CombinedDataset, test_fraction, seed: int
) -> tuple[list[str], list[str]]:
    """Single stratified train/test split.

    Per-class test size is round(class_total * test_fraction), at least 1;
    the train side must keep at least 1 sample per class. ``test_fraction``
    may be a float or a Fraction, strictly inside (0, 1). Ties round half up
    so the arithmetic is exact for rational fractions.
    """
    from fractions import Fraction

    frac = Fraction(test_fraction).limit_denominator(10**12) if isinstance(
        test_fraction, float
    ) else Fraction(test_fraction)
    if not 0 < frac < 1:
        raise ValidationError(f"test_fraction must be in (0,1), got {test_fraction}")

    ids = dataset.ids()
    labels = [s.lesion_class for s in dataset.samples]
    rng = SplitMix64(seed)
    test_idx: list[int] = []
    for label, indices in _groups_in_order(labels):
        n = len(indices)
        # round half up, exactly: floor(n*frac + 1/2)
        n_test = int(n * frac + Fraction(1, 2))
        n_test = max(1, n_test)
        if n_test >= n:
            raise StratificationError(
                f"class {label} has {n} samples; cannot hold out {n_test} and still train"
            )
        shuffled = list(indices)
        rng.shuffle(shuffled)
        test_idx.extend(shuffled[:n_test])
    test_set = set(test_idx)
    train_ids = [ids[i] for i in range(len(ids)) if i not in test_set]
    test_ids = [ids[i] for i in sorted(test_set)]
    return train_ids, test_ids


def splits_to_json(splits: Sequence[FoldSplit], k: int, seed: int) -> str:
    """Export folds as JSON; train ids are implied by complement."""
    payload = {
        "seed": seed,
        "k": k,
        "folds": [
            {"fold": s.fold_index, "test_ids": list(s.test_ids)} for s in splits
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True)
