"""
Голова идентификации

GAP -> BN-neck без обучаемого сдвига -> линейный классификатор без смещения.
Выход BN-neck служит эмбеддингом для поиска.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from autodiff import Tensor, ops
from autodiff.ops import Mode, RunningStats
from utils.errors import ConfigurationError, DimensionError


MARKET1501_TRAIN_IDS = 751


@dataclass
class NeckParams:
    """
    Параметры BN-neck

    Сдвиг beta хранится (и учитывается при подсчете параметров),
    но заморожен в нуле.

    Attributes:
        gamma: Масштаб [D]
        beta: Сдвиг [D], не обучается
        running: Скользящие статистики
        eps: eps нормализации
    """
    gamma: Tensor
    beta: Tensor
    running: RunningStats
    eps: float = ops.BN_EPS

    @classmethod
    def initialize(cls, dim: int, momentum: float = ops.BN_MOMENTUM, eps: float = ops.BN_EPS) -> 'NeckParams':
        return cls(
            gamma=Tensor(np.ones(dim), requires_grad=True),
            beta=Tensor(np.zeros(dim), requires_grad=False),
            running=RunningStats.fresh(dim, momentum),
            eps=eps,
        )


@dataclass
class IdentityHeadParams:
    """
    Параметры головы идентификации

    Attributes:
        neck: BN-neck
        classifier_weight: Веса классификатора [N, D]
        classifier_bias: Смещение классификатора (должно отсутствовать)
    """
    neck: NeckParams
    classifier_weight: Tensor
    classifier_bias: Optional[Tensor] = None

    @classmethod
    def initialize(
        cls,
        rng: np.random.Generator,
        dim: int = 2048,
        num_classes: int = MARKET1501_TRAIN_IDS,
        momentum: float = ops.BN_MOMENTUM,
        eps: float = ops.BN_EPS
    ) -> 'IdentityHeadParams':
        return cls(
            neck=NeckParams.initialize(dim, momentum, eps),
            classifier_weight=Tensor(rng.normal(0.0, 0.001, size=(num_classes, dim)), requires_grad=True),
        )

    def named_parameters(self) -> Dict[str, Tensor]:
        params = {
            'neck.gamma': self.neck.gamma,
            'classifier.weight': self.classifier_weight,
        }
        if self.neck.beta.requires_grad:
            params['neck.beta'] = self.neck.beta
        return params


def identity_head(
    fused: Tensor,
    neck: NeckParams,
    classifier_weight: Tensor,
    mode: Mode = 'train',
    classifier_bias: Optional[Tensor] = None
) -> Tuple[Tensor, Tensor]:
    """
    Голова идентификации: эмбеддинг BN(GAP(F)) и логиты W·эмбеддинг

    Args:
        fused: Слитая карта [B, D, H, W]
        neck: Параметры BN-neck
        classifier_weight: Веса классификатора [N, D]
        mode: 'train' или 'eval' (в eval - скользящие статистики)
        classifier_bias: Смещение классификатора; наличие - ошибка

    Returns:
        (эмбеддинг [B, D], логиты [B, N])
    """
    if classifier_bias is not None:
        raise ConfigurationError("классификатор не должен иметь смещения", 'classifier.bias')
    if classifier_weight.ndim != 2 or classifier_weight.shape[1] != fused.shape[1]:
        raise DimensionError(
            f"классификатор {classifier_weight.shape} для {fused.shape[1]} каналов"
        )
    pooled = ops.global_avg_pool(fused)
    embedding = ops.batchnorm_forward(pooled, neck.gamma, neck.beta, neck.eps, mode, neck.running)
    logits = ops.dense(embedding, classifier_weight)
    return embedding, logits


def identity_head_from_params(fused: Tensor, params: IdentityHeadParams, mode: Mode = 'train') -> Tuple[Tensor, Tensor]:
    """Голова идентификации по набору параметров"""
    return identity_head(fused, params.neck, params.classifier_weight, mode, params.classifier_bias)
