"""
Модель VisNet

Этот пакет содержит:
- fusion.py - проекция, выравнивание, внимание по масштабам, слияние
- identity_head.py - GAP, BN-neck, классификатор
- semantics.py - псевдометки и семантическая голова
- param_count.py - подсчет параметров по описанию архитектуры
"""

from .fusion import (
    FeaturePyramid,
    FusionParams,
    AttentionWeights,
    FusionOutput,
    project_scales,
    align_scales,
    scale_attention,
    fuse,
    fusion_forward,
)
from .identity_head import IdentityHeadParams, NeckParams, identity_head, identity_head_from_params
from .semantics import (
    PseudoLabelMap,
    SemanticHeadParams,
    spatial_class,
    foreground_mask,
    pseudo_labels,
    semantic_head_forward,
    save_label_image,
)
from .param_count import ParameterTable, count_parameters, count_layer

__all__ = [
    'FeaturePyramid',
    'FusionParams',
    'AttentionWeights',
    'FusionOutput',
    'project_scales',
    'align_scales',
    'scale_attention',
    'fuse',
    'fusion_forward',
    'IdentityHeadParams',
    'NeckParams',
    'identity_head',
    'identity_head_from_params',
    'PseudoLabelMap',
    'SemanticHeadParams',
    'spatial_class',
    'foreground_mask',
    'pseudo_labels',
    'semantic_head_forward',
    'save_label_image',
    'ParameterTable',
    'count_parameters',
    'count_layer',
]
