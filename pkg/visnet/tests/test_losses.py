"""
Тесты функций потерь
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autodiff import Tensor
from training.losses import (
    FidiConfig,
    PairSet,
    ce_label_smoothing,
    fidi_loss,
    fidi_pair_term,
    pair_relationship,
    semantic_loss,
)
from utils.errors import ConfigurationError, DegenerateBatchWarning, DimensionError


def _plain_ce(logits: np.ndarray, targets) -> float:
    """Кросс-энтропия построчно"""
    total = 0.0
    for row, target in zip(logits, targets):
        total += math.log(sum(math.exp(v) for v in row)) - row[target]
    return total / len(targets)


# === Кросс-энтропия со сглаживанием ===

@pytest.mark.parametrize('eps', [0.0, 0.1, 0.5])
def test_ce_uniform_logits_is_log_n(eps):
    loss = ce_label_smoothing(Tensor(np.zeros((3, 4))), [0, 1, 3], eps=eps)
    assert loss.item() == pytest.approx(math.log(4), abs=1e-12)


def test_ce_smoothed_value():
    loss = ce_label_smoothing(Tensor([[10.0, 0.0, 0.0, 0.0]]), [0], eps=0.1)
    assert loss.item() == pytest.approx(0.750136, abs=1e-6)


def test_ce_without_smoothing_is_plain_ce(rng):
    logits = rng.normal(size=(6, 5))
    targets = [0, 4, 2, 2, 1, 3]
    loss = ce_label_smoothing(Tensor(logits), targets, eps=0.0)
    assert loss.item() == pytest.approx(_plain_ce(logits, targets), abs=1e-12)


def test_ce_rejects_target_out_of_range():
    with pytest.raises(ValueError):
        ce_label_smoothing(Tensor(np.zeros((2, 3))), [0, 3])


def test_ce_rejects_bad_eps():
    with pytest.raises(ConfigurationError):
        ce_label_smoothing(Tensor(np.zeros((1, 3))), [0], eps=1.0)


def test_ce_permutation_invariant(rng):
    logits = rng.normal(size=(8, 5))
    targets = rng.integers(0, 5, size=8)
    order = rng.permutation(8)
    first = ce_label_smoothing(Tensor(logits), targets, eps=0.1).item()
    second = ce_label_smoothing(Tensor(logits[order]), targets[order], eps=0.1).item()
    assert first == pytest.approx(second, abs=1e-12)


# === Слагаемое FIDI ===

def test_fidi_term_positive_pair():
    assert fidi_pair_term(0.5, 1, alpha=2.0) == pytest.approx(0.084949, abs=1e-6)


def test_fidi_term_negative_pair():
    assert fidi_pair_term(0.5, 0, alpha=2.0) == pytest.approx(0.346574, abs=1e-6)


def test_fidi_term_vanishes_on_match():
    assert fidi_pair_term(1.0, 1, alpha=2.0) == pytest.approx(0.0, abs=1e-6)


def test_fidi_term_rejects_alpha_at_most_one():
    with pytest.raises(ConfigurationError):
        fidi_pair_term(0.5, 1, alpha=1.0)
    with pytest.raises(ConfigurationError):
        FidiConfig(alpha=0.5)


@settings(max_examples=300, deadline=None)
@given(
    u=st.floats(min_value=1e-6, max_value=1.0 - 1e-6),
    k=st.sampled_from([0, 1]),
    alpha=st.floats(min_value=1.01, max_value=10.0),
)
def test_fidi_term_is_non_negative(u, k, alpha):
    assert fidi_pair_term(u, k, alpha=alpha) >= -1e-12


@pytest.mark.parametrize('alpha', [1.5, 2.0, 4.0])
def test_fidi_term_monotone_in_u(alpha):
    u = np.linspace(0.01, 0.99, 99)
    positive = fidi_pair_term(u, np.ones_like(u), alpha=alpha)
    negative = fidi_pair_term(u, np.zeros_like(u), alpha=alpha)
    assert np.all(np.diff(positive) < 0)
    assert np.all(np.diff(negative) > 0)


# === FIDI по батчу ===

def test_pair_set_covers_all_pairs():
    pairs = PairSet.from_ids([5, 5, 7, 7, 7])
    assert len(pairs) == 10
    assert pairs.num_positive == 1 + 3
    assert np.all(pairs.first < pairs.second)


def test_identical_positive_embeddings_give_small_loss():
    embeddings = Tensor([[1.0, 2.0], [1.0, 2.0]])
    with pytest.warns(DegenerateBatchWarning):
        loss = fidi_loss(embeddings, [3, 3])
    assert loss.item() < 1e-3


def test_relationship_is_inside_unit_interval(rng):
    pairs = PairSet.from_ids([0, 0, 1, 1])
    u = pair_relationship(Tensor(rng.normal(size=(4, 3))), pairs, FidiConfig()).data
    assert np.all((u > 0.0) & (u < 1.0))


def test_fidi_loss_non_negative_on_random_batches():
    rng = np.random.default_rng(7)
    ids = [0, 0, 1, 1, 2, 2]
    for _ in range(200):
        embeddings = Tensor(rng.normal(size=(6, 5)))
        assert fidi_loss(embeddings, ids).item() >= 0.0


def test_fidi_loss_permutation_invariant(rng):
    data = rng.normal(size=(6, 4))
    ids = np.array([0, 0, 1, 1, 2, 2])
    order = rng.permutation(6)
    first = fidi_loss(Tensor(data), ids).item()
    second = fidi_loss(Tensor(data[order]), ids[order]).item()
    assert first == pytest.approx(second, abs=1e-12)


def test_fidi_loss_rejects_single_embedding():
    with pytest.raises(DimensionError):
        fidi_loss(Tensor([[1.0, 0.0]]), [0])


def test_fidi_loss_warns_without_negatives(rng):
    with pytest.warns(DegenerateBatchWarning):
        fidi_loss(Tensor(rng.normal(size=(3, 2))), [1, 1, 1])


# === Семантическая потеря ===

def test_semantic_uniform_logits():
    loss = semantic_loss(Tensor(np.zeros((6, 4))), np.array([0, 1, 2, 3, 3, 0]))
    assert loss.item() == pytest.approx(math.log(4), abs=1e-12)


def test_semantic_large_margin_is_small():
    labels = np.array([0, 1, 2, 3])
    logits = np.full((4, 4), -20.0)
    logits[np.arange(4), labels] = 20.0
    assert semantic_loss(Tensor(logits), labels).item() < 1e-3


def test_semantic_matches_per_location_oracle(rng):
    logits = rng.normal(size=(2 * 3 * 2, 4))
    labels = rng.integers(0, 4, size=(2, 3, 2))
    loss = semantic_loss(Tensor(logits), labels)
    assert loss.item() == pytest.approx(_plain_ce(logits, labels.reshape(-1)), abs=1e-12)


def test_semantic_rejects_shape_mismatch():
    with pytest.raises(DimensionError):
        semantic_loss(Tensor(np.zeros((5, 4))), np.zeros(4, dtype=int))


def test_semantic_permutation_invariant(rng):
    logits = rng.normal(size=(12, 4))
    labels = rng.integers(0, 4, size=12)
    order = rng.permutation(12)
    first = semantic_loss(Tensor(logits), labels).item()
    second = semantic_loss(Tensor(logits[order]), labels[order]).item()
    assert first == pytest.approx(second, abs=1e-12)
