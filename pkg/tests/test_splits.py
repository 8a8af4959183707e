from __future__ import annotations

from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from lesionbench.errors import StratificationError, ValidationError
from lesionbench.manifest import LesionClass
from lesionbench.splits import (
    SplitMix64,
    splits_to_json,
    stratified_holdout,
    stratified_kfold,
    stratified_kfold_indices,
)

from conftest import dataset_with_counts

# Reference outputs of the SplitMix64 algorithm (Vigna's reference code).
SPLITMIX64_SEED0 = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
SPLITMIX64_SEED1234567 = [6457827717110365317, 3203168211198807973, 9817491932198370423]


def test_splitmix64_reference_vectors() -> None:
    rng = SplitMix64(0)
    assert [rng.next_u64() for _ in range(3)] == SPLITMIX64_SEED0
    rng = SplitMix64(1234567)
    assert [rng.next_u64() for _ in range(3)] == SPLITMIX64_SEED1234567


def test_shuffle_is_a_permutation() -> None:
    rng = SplitMix64(42)
    items = list(range(50))
    rng.shuffle(items)
    assert sorted(items) == list(range(50))
    assert items != list(range(50))


def _fold_class_counts(dataset, split):
    by_id = {s.id: s.lesion_class for s in dataset.samples}
    return Counter(by_id[i] for i in split.test_ids)


def test_kfold_three_per_class_deals_one_each() -> None:
    dataset = dataset_with_counts(3, 3, 3)
    for split in stratified_kfold(dataset, k=3, seed=9):
        counts = _fold_class_counts(dataset, split)
        assert counts == {
            LesionClass.BENIGN: 1,
            LesionClass.MALIGNANT: 1,
            LesionClass.MELANOMA: 1,
        }


def test_kfold_imbalanced_counts_exact_stratification(counts_132_15_46) -> None:
    splits = stratified_kfold(counts_132_15_46, k=3, seed=7)
    melanoma_seen = []
    for split in splits:
        counts = _fold_class_counts(counts_132_15_46, split)
        assert counts[LesionClass.BENIGN] == 44
        assert counts[LesionClass.MALIGNANT] == 5
        assert counts[LesionClass.MELANOMA] in (15, 16)
        assert len(split.test_ids) in (64, 65)
        melanoma_seen.append(counts[LesionClass.MELANOMA])
    assert sorted(melanoma_seen) == [15, 15, 16]


def test_kfold_class_smaller_than_k_names_class() -> None:
    dataset = dataset_with_counts(5, 5, 2)
    with pytest.raises(StratificationError, match="melanoma"):
        stratified_kfold(dataset, k=3, seed=0)


def test_kfold_partitions_exactly() -> None:
    dataset = dataset_with_counts(10, 7, 5)
    splits = stratified_kfold(dataset, k=3, seed=3)
    all_test = [i for s in splits for i in s.test_ids]
    assert sorted(all_test) == sorted(dataset.ids())
    for split in splits:
        assert set(split.train_ids) | set(split.test_ids) == set(dataset.ids())
        assert not set(split.train_ids) & set(split.test_ids)


def test_kfold_deterministic_per_seed_and_sensitive_to_seed() -> None:
    dataset = dataset_with_counts(50, 30, 20)  # 100-sample fixture
    a = stratified_kfold(dataset, k=3, seed=5)
    b = stratified_kfold(dataset, k=3, seed=5)
    c = stratified_kfold(dataset, k=3, seed=6)
    assert a == b
    assert splits_to_json(a, 3, 5) == splits_to_json(b, 3, 5)
    assert [s.test_ids for s in a] != [s.test_ids for s in c]


def test_kfold_rejects_k_below_two() -> None:
    dataset = dataset_with_counts(4, 4, 4)
    with pytest.raises(ValidationError):
        stratified_kfold(dataset, k=1, seed=0)


def test_holdout_rounds_per_class(counts_132_15_46) -> None:
    train_ids, test_ids = stratified_holdout(counts_132_15_46, Fraction(1, 3), seed=1)
    by_id = {s.id: s.lesion_class for s in counts_132_15_46.samples}
    counts = Counter(by_id[i] for i in test_ids)
    assert counts == {
        LesionClass.BENIGN: 44,
        LesionClass.MALIGNANT: 5,
        LesionClass.MELANOMA: 15,
    }
    assert len(train_ids) + len(test_ids) == 193
    assert not set(train_ids) & set(test_ids)


def test_holdout_two_samples_splits_one_one() -> None:
    dataset = dataset_with_counts(2, 2, 2)
    train_ids, test_ids = stratified_holdout(dataset, 0.5, seed=0)
    assert len(train_ids) == 3
    assert len(test_ids) == 3


def test_holdout_fraction_bounds() -> None:
    dataset = dataset_with_counts(4, 4, 4)
    with pytest.raises(ValidationError):
        stratified_holdout(dataset, 0, seed=0)
    with pytest.raises(ValidationError):
        stratified_holdout(dataset, 1, seed=0)


def test_holdout_class_too_small() -> None:
    dataset = dataset_with_counts(1, 4, 4)
    with pytest.raises(StratificationError):
        stratified_holdout(dataset, 0.5, seed=0)


def test_splits_json_schema(counts_132_15_46) -> None:
    import json

    splits = stratified_kfold(counts_132_15_46, k=3, seed=7)
    obj = json.loads(splits_to_json(splits, 3, 7))
    assert obj["seed"] == 7
    assert obj["k"] == 3
    assert [f["fold"] for f in obj["folds"]] == [0, 1, 2]
    assert all(isinstance(f["test_ids"], list) for f in obj["folds"])


@settings(max_examples=60, deadline=None)
@given(
    counts=st.lists(st.integers(min_value=2, max_value=40), min_size=1, max_size=5),
    k=st.integers(min_value=2, max_value=4),
    seed=st.integers(min_value=0, max_value=2**64 - 1),
)
def test_kfold_property_partition_and_balance(counts: list[int], k: int, seed: int) -> None:
    if min(counts) < k:
        counts = [max(c, k) for c in counts]
    labels = [f"class{ci}" for ci, c in enumerate(counts) for _ in range(c)]
    folds = stratified_kfold_indices(labels, k, seed)

    flat = [i for fold in folds for i in fold]
    assert sorted(flat) == list(range(len(labels)))  # exact partition

    for ci, c in enumerate(counts):
        per_fold = [sum(1 for i in fold if labels[i] == f"class{ci}") for fold in folds]
        assert max(per_fold) - min(per_fold) <= 1
        assert all(abs(n - c // k) <= 1 for n in per_fold)
