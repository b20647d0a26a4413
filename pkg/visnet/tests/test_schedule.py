"""
Тесты динамического взвешивания потерь
"""

import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autodiff import Tape, Tensor, backward, ops
from training.schedule import (
    DWAState,
    DynamicWeightAveraging,
    append_weight_row,
    dwa_update,
    loss_ratio,
    softmax_weights,
    total_loss,
)
from utils.errors import ConfigurationError, PoisonedStateError


def test_equal_ratios_give_uniform_weights():
    np.testing.assert_allclose(softmax_weights([0.7, 0.7, 0.7]), [1 / 3] * 3, atol=1e-15)


def test_reference_weights():
    weights = softmax_weights([1.0, 0.9, 1.1], temperature=2.0)
    np.testing.assert_allclose(weights, [0.33306, 0.31681, 0.35013], atol=1e-5)


def test_high_temperature_is_uniform():
    weights = softmax_weights([1.0, 0.9, 1.1], temperature=1e6)
    assert np.max(np.abs(weights - 1.0 / 3.0)) < 1e-6


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(min_value=0.0, max_value=10.0), min_size=3, max_size=3))
def test_weights_are_a_distribution(ratios):
    weights = softmax_weights(ratios)
    assert abs(weights.sum() - 1.0) <= 1e-12
    assert np.all((weights > 0) & (weights < 1))
    ordered = sorted(ratios)
    if ordered[2] - ordered[1] > 1e-9:
        assert int(np.argmax(weights)) == int(np.argmax(ratios))


def test_warmup_is_uniform():
    state = DWAState()
    assert dwa_update(state, (1.0, 2.0, 3.0)) == pytest.approx((1 / 3, 1 / 3, 1 / 3))
    assert not state.ready


@pytest.mark.parametrize('mode', ['window', 'step'])
def test_two_steps_reproduce_reference(mode):
    state = DWAState(ratio_mode=mode)
    dwa_update(state, (1.0, 1.0, 1.0))
    weights = dwa_update(state, (1.0, 0.9, 1.1))
    np.testing.assert_allclose(weights, [0.33306, 0.31681, 0.35013], atol=1e-5)


def test_window_ratio_uses_half_means():
    assert loss_ratio([4.0, 2.0, 1.0, 1.0], 'window', 0.0) == pytest.approx(1.0 / 3.0)
    assert loss_ratio([4.0, 2.0, 1.0, 1.0], 'step', 0.0) == pytest.approx(1.0)


def test_buffers_never_exceed_window():
    state = DWAState(window=4)
    for step in range(10):
        dwa_update(state, (1.0 + step, 2.0, 3.0))
    assert all(len(buffer) == 4 for buffer in state.buffers)
    assert state.t == 10


def test_update_is_deterministic():
    losses = [(2.0, 3.0, 1.0), (1.8, 2.9, 1.1), (1.7, 2.5, 1.0)]
    runs = []
    for _ in range(2):
        state = DWAState()
        runs.append([dwa_update(state, values) for values in losses])
    assert runs[0] == runs[1]


def test_non_finite_loss_poisons_state():
    state = DWAState()
    with pytest.raises(PoisonedStateError):
        dwa_update(state, (1.0, float('nan'), 1.0))
    assert state.poisoned
    with pytest.raises(PoisonedStateError):
        dwa_update(state, (1.0, 1.0, 1.0))


def test_negative_loss_is_rejected():
    with pytest.raises(ValueError):
        dwa_update(DWAState(), (1.0, -0.1, 1.0))


def test_bad_configuration():
    with pytest.raises(ConfigurationError):
        DWAState(temperature=0.0)
    with pytest.raises(ConfigurationError):
        DWAState(ratio_mode='median')


def test_scheduler_history():
    dwa = DynamicWeightAveraging(window=6)
    for values in [(1.0, 1.0, 1.0), (0.5, 1.0, 2.0), (0.4, 1.0, 2.5)]:
        dwa.update(values)
    history = dwa.history
    assert [step for step, _ in history] == [1, 2, 3]
    assert history[-1][1] == dwa.weights
    assert abs(sum(dwa.weights) - 1.0) <= 1e-12


# === Общая потеря ===

def test_selector_weights_return_first_loss():
    losses = [Tensor(1.25), Tensor(2.0), Tensor(3.0)]
    assert total_loss(losses, (1.0, 0.0, 0.0)).item() == 1.25


def test_uniform_weights_average():
    losses = [Tensor(3.0), Tensor(6.0), Tensor(9.0)]
    assert total_loss(losses, (1 / 3, 1 / 3, 1 / 3)).item() == pytest.approx(6.0, abs=1e-12)


def test_total_gradient_is_weighted_sum(rng):
    data = rng.normal(size=5)
    weights = (0.2, 0.5, 0.3)

    def build(x):
        return [ops.sum(ops.mul(x, x)), ops.sum(ops.sigmoid(x)), ops.mean(ops.exp(x))]

    x = Tensor(data, requires_grad=True)
    with Tape() as tape:
        total = total_loss(build(x), weights)
    backward(tape, total)
    combined = x.grad

    expected = np.zeros_like(data)
    for index, weight in enumerate(weights):
        x = Tensor(data, requires_grad=True)
        with Tape() as tape:
            parts = build(x)
        backward(tape, parts[index])
        expected += weight * x.grad
    np.testing.assert_allclose(combined, expected, atol=1e-12)


def test_weight_row_format(tmp_path):
    log_file = tmp_path / 'w.log'
    logger = logging.getLogger('test.dwa.rows')
    handler = logging.FileHandler(log_file, mode='w', encoding='utf-8')
    logger.addHandler(handler)
    logger.setLevel(logging.INFO)
    logger.propagate = False
    try:
        append_weight_row(logger, 3, (0.25, 0.25, 0.5))
    finally:
        handler.close()
        logger.removeHandler(handler)
    assert log_file.read_text(encoding='utf-8') == "step=3 w_fidi=0.25 w_ce=0.25 w_semantic=0.5\n"
