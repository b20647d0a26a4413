"""
Тесты блока слияния и головы идентификации
"""

import numpy as np
import pytest

from autodiff import Tensor, grad_check, ops
from autodiff.ops import RunningStats
from model.fusion import (
    AttentionWeights,
    FeaturePyramid,
    FusionParams,
    ProjectionParams,
    align_scales,
    fuse,
    fusion_forward,
    project_scales,
    scale_attention,
)
from model.identity_head import IdentityHeadParams, MARKET1501_TRAIN_IDS, identity_head, identity_head_from_params
from training.losses import ce_label_smoothing
from utils.errors import ConfigurationError, DimensionError


def _pyramid(rng, batch=2, channels=(3, 4, 5, 6), stage4=(2, 1), fill=None) -> FeaturePyramid:
    stages = []
    for index, c in enumerate(channels):
        factor = 2 ** (3 - index)
        shape = (batch, c, stage4[0] * factor, stage4[1] * factor)
        data = np.full(shape, fill) if fill is not None else rng.normal(size=shape)
        stages.append(Tensor(data))
    return FeaturePyramid(stages)


def _identity_params(channels: int) -> FusionParams:
    projections = [
        ProjectionParams(
            weight=Tensor(np.eye(channels)),
            bias=None,
            gamma=Tensor(np.ones(channels)),
            beta=Tensor(np.zeros(channels)),
            running=RunningStats.fresh(channels),
        )
        for _ in range(4)
    ]
    return FusionParams(
        projections=projections,
        attn_w1=Tensor(np.zeros((2, channels))),
        attn_b1=Tensor(np.zeros(2)),
        attn_w2=Tensor(np.zeros((4, 2))),
        attn_b2=Tensor(np.zeros(4)),
    )


# === Пирамида ===

def test_pyramid_requires_halving(rng):
    stages = [Tensor(rng.normal(size=(1, 2, s, s))) for s in (8, 4, 2, 2)]
    with pytest.raises(DimensionError):
        FeaturePyramid(stages)


# === Проекция ===

def test_zero_input_projects_to_zero(rng):
    params = FusionParams.initialize(rng, stage_channels=(3, 4, 5, 6), dim=4, hidden=3)
    projected = project_scales(_pyramid(rng, fill=0.0), params, 'train')
    for tensor in projected:
        assert np.all(tensor.data == 0.0)


def test_identity_projection_in_eval_mode(rng):
    pyramid = _pyramid(rng, channels=(3, 3, 3, 3))
    projected = project_scales(pyramid, _identity_params(3), 'eval')
    for stage, out in zip(pyramid.stages, projected):
        np.testing.assert_allclose(out.data, np.maximum(stage.data, 0.0) / np.sqrt(1.0 + 1e-5), atol=1e-12)


def test_projection_reaches_common_dimension(rng):
    params = FusionParams.initialize(rng, stage_channels=(3, 4, 5, 6), dim=7, hidden=3)
    pyramid = _pyramid(rng)
    projected = project_scales(pyramid, params)
    for stage, out in zip(pyramid.stages, projected):
        assert out.shape == (2, 7) + stage.shape[2:]
        assert np.all(out.data >= 0.0)


def test_projection_channel_mismatch(rng):
    params = FusionParams.initialize(rng, stage_channels=(3, 4, 5, 6), dim=4, hidden=3)
    with pytest.raises(DimensionError):
        project_scales(_pyramid(rng, channels=(3, 4, 5, 7)), params)


# === Выравнивание ===

def test_alignment_to_stage4_resolution(rng):
    stages = [Tensor(rng.normal(size=(1, 2, 256 // s, 128 // s))) for s in (4, 8, 16, 32)]
    aligned = align_scales(stages)
    assert all(t.shape == (1, 2, 8, 4) for t in aligned)
    assert aligned[3] is stages[3]


def test_alignment_keeps_constants():
    stages = [Tensor(np.full((1, 2, 16 // 2 ** i, 8 // 2 ** i), 0.25 * (i + 1))) for i in range(4)]
    for index, tensor in enumerate(align_scales(stages)):
        np.testing.assert_allclose(tensor.data, 0.25 * (index + 1), atol=1e-12)


# === Внимание ===

def test_zero_attention_params_give_half():
    aligned = [Tensor(np.ones((3, 2, 2, 2)) * i) for i in range(4)]
    weights = scale_attention(aligned, _identity_params(2))
    np.testing.assert_array_equal(weights.as_array(), np.full((3, 4), 0.5))


def test_attention_strictly_inside_unit_interval(rng):
    params = FusionParams.initialize(rng, stage_channels=(3, 4, 5, 6), dim=4, hidden=3)
    out = fusion_forward(_pyramid(rng, batch=5), params)
    w = out.weights.as_array()
    assert w.shape == (5, 4)
    assert np.all((w > 0.0) & (w < 1.0))


def test_attention_invariant_to_map_order(rng):
    params = FusionParams.initialize(rng, stage_channels=(2, 2, 2, 2), dim=2, hidden=3)
    aligned = [Tensor(rng.normal(size=(2, 2, 3, 3))) for _ in range(4)]
    forward = scale_attention(aligned, params).as_array()
    backward_order = scale_attention(aligned[::-1], params).as_array()
    np.testing.assert_allclose(forward, backward_order, atol=1e-12)


def test_attention_output_must_have_four_scales(rng):
    params = _identity_params(2)
    params.attn_w2 = Tensor(np.zeros((3, 2)))
    with pytest.raises(ConfigurationError):
        scale_attention([Tensor(np.ones((1, 2, 2, 2)))] * 4, params)


# === Слияние ===

def test_selector_weights(rng):
    aligned = [Tensor(rng.normal(size=(2, 3, 2, 2))) for _ in range(4)]
    fused = fuse(aligned, AttentionWeights.constant([1.0, 0.0, 0.0, 0.0]))
    assert np.array_equal(fused.data, aligned[0].data)


def test_unnormalized_weights_sum_to_two(rng):
    m = Tensor(rng.normal(size=(1, 2, 3, 3)))
    fused = fuse([m] * 4, AttentionWeights.constant([0.5] * 4))
    np.testing.assert_allclose(fused.data, 2.0 * m.data, atol=1e-12)


def test_fuse_is_linear_in_maps(rng):
    a = [Tensor(rng.normal(size=(2, 2, 2, 2))) for _ in range(4)]
    b = [Tensor(rng.normal(size=(2, 2, 2, 2))) for _ in range(4)]
    w = AttentionWeights(Tensor(rng.uniform(size=(2, 4))))
    summed = fuse([Tensor(x.data + y.data) for x, y in zip(a, b)], w).data
    np.testing.assert_allclose(summed, fuse(a, w).data + fuse(b, w).data, atol=1e-12)


def test_gradient_with_respect_to_weights(rng):
    aligned = [Tensor(rng.normal(size=(2, 3, 2, 2))) for _ in range(4)]
    cotangent = Tensor(rng.normal(size=(2, 3, 2, 2)))
    w = Tensor(rng.uniform(size=(2, 4)))

    def objective():
        return ops.sum(ops.mul(fuse(aligned, AttentionWeights(w)), cotangent))

    report = grad_check(objective, {'w': w})
    assert report.max_rel_err <= 1e-5

    expected = np.array([[np.sum(cotangent.data[b] * aligned[i].data[b]) for i in range(4)] for b in range(2)])
    np.testing.assert_allclose(w.grad, expected, atol=1e-12)


def test_fusion_gap_ce_gradients(rng):
    fusion = FusionParams.initialize(rng, stage_channels=(3, 4, 5, 6), dim=5, hidden=4, projection_bias=False)
    head = IdentityHeadParams.initialize(rng, dim=5, num_classes=3)
    head.classifier_weight = Tensor(rng.normal(size=(3, 5)))
    pyramid = _pyramid(rng, batch=4)
    targets = [0, 1, 2, 0]

    def objective():
        out = fusion_forward(pyramid, fusion, 'train')
        _, logits = identity_head_from_params(out.fused, head, 'train')
        return ce_label_smoothing(logits, targets, eps=0.1)

    params = dict(fusion.named_parameters())
    params.update(head.named_parameters())
    report = grad_check(objective, params)
    assert report.max_rel_err <= 1e-4


# === Голова идентификации ===

def test_constant_map_gives_constant_embedding():
    fused = Tensor(np.broadcast_to(np.arange(4.0).reshape(1, 4, 1, 1), (3, 4, 2, 2)).copy())
    head = IdentityHeadParams.initialize(np.random.default_rng(0), dim=4, num_classes=5)
    embedding, logits = identity_head_from_params(fused, head, 'eval')
    assert embedding.shape == (3, 4)
    assert logits.shape == (3, 5)
    assert np.all(embedding.data == embedding.data[0])


def test_default_class_count():
    assert MARKET1501_TRAIN_IDS == 751
    head = IdentityHeadParams.initialize(np.random.default_rng(0), dim=8)
    assert head.classifier_weight.shape == (751, 8)


def test_classifier_bias_is_rejected():
    head = IdentityHeadParams.initialize(np.random.default_rng(0), dim=2, num_classes=3)
    with pytest.raises(ConfigurationError):
        identity_head(Tensor(np.ones((2, 2, 1, 1))), head.neck, head.classifier_weight,
                      classifier_bias=Tensor(np.zeros(3)))


def test_logits_are_homogeneous(rng):
    weight = Tensor(rng.normal(size=(5, 4)))
    e = rng.normal(size=(3, 4))
    scaled = ops.dense(Tensor(2.5 * e), weight).data
    np.testing.assert_allclose(scaled, 2.5 * ops.dense(Tensor(e), weight).data, atol=1e-12)
