from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from lesionbench.balance import (
    ClassWeights,
    NormalizeMode,
    balancer_weights,
    normalize_weights,
)
from lesionbench.errors import ConstraintViolation


def oracle_weights(train: dict, test: dict) -> dict:
    """Independent re-derivation: literal per-class loop over DTC and ITC."""
    mc = max(train.values())
    out = {}
    for c in train:
        dtc = Fraction(test[c]) / Fraction(train[c])
        itc = Fraction(mc) / Fraction(train[c])
        out[c] = dtc * itc
    return out


def test_symmetric_counts_give_equal_weights() -> None:
    w = balancer_weights({"a": 10, "b": 10, "c": 10}, {"a": 5, "b": 5, "c": 5})
    assert set(w.weights.values()) == {Fraction(1, 2)}


def test_imbalanced_example_matches_hand_arithmetic() -> None:
    train = {"benign": 88, "malignant": 10, "melanoma": 31}
    test = {"benign": 44, "malignant": 5, "melanoma": 15}
    w = balancer_weights(train, test)
    assert w.weights["benign"] == Fraction(1, 2)
    assert w.weights["malignant"] == Fraction(22, 5)
    assert w.weights["melanoma"] == Fraction(1320, 961)
    assert w.as_float("malignant") == pytest.approx(4.4)
    assert w.as_float("melanoma") == pytest.approx(1.3736, abs=1e-4)
    assert w.weights == oracle_weights(train, test)


def test_minority_class_gets_larger_weight() -> None:
    w = balancer_weights({"a": 3, "b": 1}, {"a": 1, "b": 1})
    assert w.weights["a"] == Fraction(1, 3)
    assert w.weights["b"] == Fraction(3)
    assert w.weights["b"] > w.weights["a"]


def test_class_set_mismatch_names_class() -> None:
    with pytest.raises(ConstraintViolation, match="b"):
        balancer_weights({"a": 1, "b": 2}, {"a": 1})


def test_zero_count_rejected() -> None:
    with pytest.raises(ConstraintViolation, match="a"):
        balancer_weights({"a": 0, "b": 2}, {"a": 1, "b": 1})
    with pytest.raises(ConstraintViolation):
        balancer_weights({"a": 1, "b": 2}, {"a": 1, "b": 0})


def test_empty_counts_rejected() -> None:
    with pytest.raises(ConstraintViolation):
        balancer_weights({}, {})


def test_literal_reading_collapses_to_test_over_mc() -> None:
    train = {"benign": 88, "malignant": 10, "melanoma": 31}
    test = {"benign": 44, "malignant": 5, "melanoma": 15}
    w = balancer_weights(train, test, literal=True)
    assert w.weights == {
        "benign": Fraction(44, 88),
        "malignant": Fraction(5, 88),
        "melanoma": Fraction(15, 88),
    }


def test_normalize_none_is_identity() -> None:
    w = balancer_weights({"a": 88, "b": 10}, {"a": 44, "b": 5})
    assert normalize_weights(w, NormalizeMode.NONE) is w


def test_normalize_mean_one() -> None:
    w = ClassWeights({"a": Fraction(2), "b": Fraction(4)})
    n = normalize_weights(w, NormalizeMode.MEAN_ONE)
    assert n.weights == {"a": Fraction(2, 3), "b": Fraction(4, 3)}
    assert sum(n.weights.values()) / 2 == 1


def test_normalize_max_one() -> None:
    w = ClassWeights({"a": Fraction(2), "b": Fraction(4)})
    n = normalize_weights(w, NormalizeMode.MAX_ONE)
    assert n.weights == {"a": Fraction(1, 2), "b": Fraction(1)}


def test_normalize_preserves_ratios_exactly() -> None:
    w = balancer_weights({"a": 88, "b": 10, "c": 31}, {"a": 44, "b": 5, "c": 15})
    for mode in (NormalizeMode.MEAN_ONE, NormalizeMode.MAX_ONE):
        n = normalize_weights(w, mode)
        assert n.weights["b"] / n.weights["a"] == w.weights["b"] / w.weights["a"]
        assert n.weights["c"] / n.weights["a"] == w.weights["c"] / w.weights["a"]


def test_vector_and_json_rendering() -> None:
    w = balancer_weights(
        {"benign": 88, "malignant": 10, "melanoma": 31},
        {"benign": 44, "malignant": 5, "melanoma": 15},
    )
    assert w.vector(["benign", "malignant", "melanoma"]) == [0.5, 4.4, float(Fraction(1320, 961))]
    as_json = w.to_json()
    assert as_json["weights"]["malignant"] == 4.4
    assert as_json["fractions"]["melanoma"] == "1320/961"


def test_nonpositive_weight_rejected() -> None:
    with pytest.raises(ConstraintViolation):
        ClassWeights({"a": Fraction(0)})


_counts = st.dictionaries(
    st.sampled_from(["a", "b", "c", "d", "e", "f"]),
    st.integers(min_value=1, max_value=500),
    min_size=2,
    max_size=6,
)


@given(_counts, st.integers(min_value=1, max_value=500))
def test_property_matches_oracle(train: dict, scale_seed: int) -> None:
    # pair the class set with fresh test counts derived from the seed
    test = {c: 1 + (hash((c, scale_seed)) % 500) for c in train}
    assert balancer_weights(train, test).weights == oracle_weights(train, test)


@given(_counts, st.integers(min_value=1, max_value=7))
def test_property_proportional_test_is_inverse_frequency(train: dict, alpha: int) -> None:
    # test = alpha * train => weight(C) = alpha * MC / train(C), decreasing in train(C)
    test = {c: alpha * n for c, n in train.items()}
    w = balancer_weights(train, test).weights
    mc = max(train.values())
    for c, n in train.items():
        assert w[c] == Fraction(alpha) * Fraction(mc, n)
    ordered = sorted(train, key=train.__getitem__)
    for small, large in zip(ordered, ordered[1:]):
        assert w[small] >= w[large]


@given(_counts, st.integers(min_value=2, max_value=9))
def test_property_joint_scaling_invariance(train: dict, scale: int) -> None:
    test = {c: 1 + (hash(c) % 100) for c in train}
    base = balancer_weights(train, test).weights
    scaled = balancer_weights(
        {c: scale * n for c, n in train.items()},
        {c: scale * n for c, n in test.items()},
    ).weights
    assert base == scaled
