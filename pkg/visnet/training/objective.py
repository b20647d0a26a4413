"""
Целевая функция VisNet

Параметры всей обучаемой части (слияние + обе головы) и прямой проход
до трех потерь.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from autodiff import Tensor
from autodiff.ops import Mode
from model.fusion import FeaturePyramid, FusionOutput, FusionParams, fusion_forward
from model.identity_head import IdentityHeadParams, identity_head_from_params
from model.semantics import (
    PseudoLabelMap,
    SemanticHeadParams,
    pseudo_labels,
    semantic_head_forward,
)

from .losses import FidiConfig, ce_label_smoothing, fidi_loss, semantic_loss


@dataclass
class VisNetParams:
    """
    Обучаемые параметры

    Attributes:
        fusion: Блок слияния
        identity: Голова идентификации
        semantic: Семантическая голова
    """
    fusion: FusionParams
    identity: IdentityHeadParams
    semantic: SemanticHeadParams

    @classmethod
    def initialize(
        cls,
        rng: np.random.Generator,
        stage_channels: Sequence[int],
        dim: int,
        attention_hidden: int,
        num_classes: int,
        semantic_hidden: Sequence[int],
        dropout: float = 0.1,
        projection_bias: bool = True,
        hidden_bias: bool = True
    ) -> 'VisNetParams':
        """
        Случайная инициализация всех частей

        Args:
            rng: Генератор
            stage_channels: Каналы стадий пирамиды
            dim: Общая размерность D
            attention_hidden: Скрытая ширина MLP внимания
            num_classes: Число личностей обучения
            semantic_hidden: Скрытые ширины семантической головы
            dropout: Доля dropout семантической головы
            projection_bias: Смещения проекций
            hidden_bias: Смещения скрытых слоев семантической головы

        Returns:
            Параметры
        """
        return cls(
            fusion=FusionParams.initialize(rng, stage_channels, dim, attention_hidden,
                                           projection_bias=projection_bias),
            identity=IdentityHeadParams.initialize(rng, dim, num_classes),
            semantic=SemanticHeadParams.initialize(rng, dim, semantic_hidden, dropout,
                                                   hidden_bias=hidden_bias),
        )

    def named_parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for prefix, part in (('fusion', self.fusion), ('identity', self.identity), ('semantic', self.semantic)):
            for name, tensor in part.named_parameters().items():
                params[f"{prefix}.{name}"] = tensor
        return params


@dataclass
class ObjectiveConfig:
    """
    Настройки потерь

    Attributes:
        label_smoothing: Сглаживание меток идентификации
        fidi: Настройки FIDI
    """
    label_smoothing: float = 0.1
    fidi: FidiConfig = field(default_factory=FidiConfig)


@dataclass
class StepOutput:
    """
    Результат прямого прохода

    Attributes:
        fidi: Потеря FIDI
        ce: Кросс-энтропия идентичностей
        semantic: Семантическая потеря
        fusion: Промежуточные карты слияния
        embedding: Эмбеддинги BN-neck [B, D]
        labels: Псевдометки
    """
    fidi: Tensor
    ce: Tensor
    semantic: Tensor
    fusion: FusionOutput
    embedding: Tensor
    labels: PseudoLabelMap

    @property
    def losses(self) -> Tuple[Tensor, Tensor, Tensor]:
        """Потери в порядке (fidi, ce, semantic)"""
        return self.fidi, self.ce, self.semantic

    def loss_values(self) -> Tuple[float, float, float]:
        return tuple(loss.item() for loss in self.losses)


def compute_losses(
    params: VisNetParams,
    pyramid: FeaturePyramid,
    class_targets: Sequence[int],
    pids: Sequence[int],
    cfg: Optional[ObjectiveConfig] = None,
    mode: Mode = 'train',
    rng: Optional[np.random.Generator] = None,
    labels: Optional[PseudoLabelMap] = None
) -> StepOutput:
    """
    Прямой проход до трех потерь

    Псевдометки строятся по слитой карте, если не переданы явно.

    Args:
        params: Параметры
        pyramid: Пирамида признаков батча
        class_targets: Номера классов для классификатора
        pids: Личности для FIDI
        cfg: Настройки потерь
        mode: 'train' или 'eval'
        rng: Генератор масок dropout
        labels: Готовые псевдометки

    Returns:
        Потери и промежуточные результаты
    """
    cfg = cfg or ObjectiveConfig()
    fusion = fusion_forward(pyramid, params.fusion, mode)
    embedding, logits = identity_head_from_params(fusion.fused, params.identity, mode)
    if labels is None:
        labels = pseudo_labels(fusion.fused)
    semantic_logits = semantic_head_forward(fusion.fused, params.semantic, mode, rng)

    return StepOutput(
        fidi=fidi_loss(embedding, pids, cfg.fidi),
        ce=ce_label_smoothing(logits, class_targets, cfg.label_smoothing),
        semantic=semantic_loss(semantic_logits, labels),
        fusion=fusion,
        embedding=embedding,
        labels=labels,
    )
