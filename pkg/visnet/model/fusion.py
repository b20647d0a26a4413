"""
Модуль многомасштабного слияния

Проекция четырех стадий в общую размерность, выравнивание по
разрешению стадии 4, обучаемое внимание по масштабам и взвешенная сумма.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from autodiff import Tensor, ops
from autodiff.ops import Mode, RunningStats
from config.architecture import STAGE_CHANNELS
from utils.errors import ConfigurationError, DimensionError


NUM_SCALES = 4


def he_normal(rng: np.random.Generator, fan_out: int, fan_in: int) -> Tensor:
    """Инициализация He для аффинных весов [fan_out, fan_in]"""
    return Tensor(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in)), requires_grad=True)


@dataclass
class FeaturePyramid:
    """
    Карты четырех стадий бэкбона

    Attributes:
        stages: Тензоры [B, C_i, H_i, W_i]; пространственные размеры
            уменьшаются вдвое от стадии к стадии
    """
    stages: List[Tensor]

    def __post_init__(self):
        if len(self.stages) != NUM_SCALES:
            raise DimensionError(f"пирамида должна содержать {NUM_SCALES} стадии, получено {len(self.stages)}")
        batch = self.stages[0].shape[0]
        for index, stage in enumerate(self.stages):
            if stage.ndim != 4:
                raise DimensionError(f"стадия {index + 1}: ожидается ранг 4, получено {stage.shape}")
            if stage.shape[0] != batch:
                raise DimensionError(f"стадия {index + 1}: батч {stage.shape[0]} вместо {batch}")
        for upper, lower in zip(self.stages, self.stages[1:]):
            for axis in (2, 3):
                if (upper.shape[axis] + 1) // 2 != lower.shape[axis]:
                    raise DimensionError(
                        f"размеры стадий {upper.shape[2:]} -> {lower.shape[2:]} не уменьшаются вдвое"
                    )

    @property
    def channels(self) -> Tuple[int, ...]:
        return tuple(stage.shape[1] for stage in self.stages)


@dataclass
class ProjectionParams:
    """
    Проекция одной стадии: Conv1×1 -> BN -> ReLU

    Attributes:
        weight: Веса [D, C_i]
        bias: Смещение [D] или None
        gamma: Масштаб BN [D]
        beta: Сдвиг BN [D]
        running: Скользящие статистики BN
    """
    weight: Tensor
    bias: Optional[Tensor]
    gamma: Tensor
    beta: Tensor
    running: RunningStats

    @classmethod
    def initialize(
        cls,
        in_channels: int,
        dim: int,
        rng: np.random.Generator,
        bias: bool = True,
        momentum: float = ops.BN_MOMENTUM
    ) -> 'ProjectionParams':
        return cls(
            weight=he_normal(rng, dim, in_channels),
            bias=Tensor(np.zeros(dim), requires_grad=True) if bias else None,
            gamma=Tensor(np.ones(dim), requires_grad=True),
            beta=Tensor(np.zeros(dim), requires_grad=True),
            running=RunningStats.fresh(dim, momentum),
        )


@dataclass
class FusionParams:
    """
    Параметры блока слияния

    Attributes:
        projections: Четыре проекции стадий
        attn_w1: Веса первого слоя внимания [D_h, D]
        attn_b1: Смещение [D_h]
        attn_w2: Веса второго слоя [4, D_h]
        attn_b2: Смещение [4]
        eps: eps батч-нормализации
    """
    projections: List[ProjectionParams]
    attn_w1: Tensor
    attn_b1: Tensor
    attn_w2: Tensor
    attn_b2: Tensor
    eps: float = ops.BN_EPS

    def __post_init__(self):
        if len(self.projections) != NUM_SCALES:
            raise ConfigurationError(
                f"ожидается {NUM_SCALES} проекции, получено {len(self.projections)}", 'fusion.projections'
            )

    @classmethod
    def initialize(
        cls,
        rng: np.random.Generator,
        stage_channels: Sequence[int] = STAGE_CHANNELS,
        dim: int = 2048,
        hidden: int = 512,
        projection_bias: bool = True,
        momentum: float = ops.BN_MOMENTUM,
        eps: float = ops.BN_EPS
    ) -> 'FusionParams':
        """
        Случайная инициализация

        Args:
            rng: Генератор
            stage_channels: Каналы стадий
            dim: Общая размерность D
            hidden: Скрытая ширина MLP внимания
            projection_bias: Смещение у проекций
            momentum: Момент BN
            eps: eps BN

        Returns:
            Параметры блока слияния
        """
        projections = [
            ProjectionParams.initialize(c, dim, rng, bias=projection_bias, momentum=momentum)
            for c in stage_channels
        ]
        return cls(
            projections=projections,
            attn_w1=he_normal(rng, hidden, dim),
            attn_b1=Tensor(np.zeros(hidden), requires_grad=True),
            attn_w2=Tensor(rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(NUM_SCALES, hidden)),
                           requires_grad=True),
            attn_b2=Tensor(np.zeros(NUM_SCALES), requires_grad=True),
            eps=eps,
        )

    @property
    def dim(self) -> int:
        return self.projections[0].weight.shape[0]

    def named_parameters(self) -> Dict[str, Tensor]:
        params: Dict[str, Tensor] = {}
        for index, proj in enumerate(self.projections, start=1):
            params[f"proj{index}.weight"] = proj.weight
            if proj.bias is not None:
                params[f"proj{index}.bias"] = proj.bias
            params[f"proj{index}.gamma"] = proj.gamma
            params[f"proj{index}.beta"] = proj.beta
        params['attn.w1'] = self.attn_w1
        params['attn.b1'] = self.attn_b1
        params['attn.w2'] = self.attn_w2
        params['attn.b2'] = self.attn_b2
        return params


@dataclass
class AttentionWeights:
    """
    Веса масштабов

    Каждый вес лежит в [0, 1] (выход сигмоиды); сумма не нормируется.

    Attributes:
        values: Тензор [B, 4] (по строке на изображение)
    """
    values: Tensor

    def __post_init__(self):
        if self.values.ndim == 1:
            self.values = ops.reshape(self.values, (1, -1))
        if self.values.ndim != 2 or self.values.shape[1] != NUM_SCALES:
            raise ConfigurationError(
                f"внимание должно давать {NUM_SCALES} веса, форма {self.values.shape}", 'attention'
            )

    @classmethod
    def constant(cls, weights: Sequence[float]) -> 'AttentionWeights':
        """Фиксированные веса, общие для всего батча"""
        return cls(Tensor(np.asarray(weights, dtype=np.float64).reshape(1, -1)))

    def as_array(self) -> np.ndarray:
        return self.values.data.copy()


def project_scales(pyramid: FeaturePyramid, params: FusionParams, mode: Mode = 'train') -> List[Tensor]:
    """
    Проецирует стадии в общую размерность: F_i' = ReLU(BN(Conv1×1(F_i)))

    Args:
        pyramid: Пирамида признаков
        params: Параметры слияния
        mode: 'train' или 'eval'

    Returns:
        Четыре карты [B, D, H_i, W_i]
    """
    projected = []
    for index, (stage, proj) in enumerate(zip(pyramid.stages, params.projections), start=1):
        if stage.shape[1] != proj.weight.shape[1]:
            raise DimensionError(
                f"стадия {index}: {stage.shape[1]} каналов, проекция ожидает {proj.weight.shape[1]}"
            )
        x = ops.conv1x1_forward(stage, proj.weight, proj.bias)
        x = ops.batchnorm_forward(x, proj.gamma, proj.beta, params.eps, mode, proj.running)
        projected.append(ops.relu(x))
    return projected


def align_scales(projected: Sequence[Tensor]) -> List[Tensor]:
    """
    Приводит все карты к разрешению стадии 4 билинейной интерполяцией

    Карта стадии 4 проходит без изменений.

    Args:
        projected: Четыре карты [B, D, H_i, W_i]

    Returns:
        Четыре карты [B, D, H, W]
    """
    if len(projected) != NUM_SCALES:
        raise DimensionError(f"ожидается {NUM_SCALES} карты, получено {len(projected)}")
    reference = projected[-1]
    for index, tensor in enumerate(projected, start=1):
        if tensor.ndim != 4 or tensor.shape[:2] != reference.shape[:2]:
            raise DimensionError(
                f"карта {index}: форма {tensor.shape} не согласована с {reference.shape}"
            )
    target = reference.shape[2:]
    return [ops.bilinear_resize(t, target) for t in projected[:-1]] + [reference]


def scale_attention(aligned: Sequence[Tensor], params: FusionParams) -> AttentionWeights:
    """
    Внимание по масштабам

    F̄ - среднее четырех карт; w = sigmoid(FC(ReLU(FC(GAP(F̄))))).

    Args:
        aligned: Четыре выровненные карты
        params: Параметры слияния

    Returns:
        Веса масштабов [B, 4]
    """
    if params.attn_w2.shape[0] != NUM_SCALES:
        raise ConfigurationError(
            f"выход MLP внимания {params.attn_w2.shape[0]} вместо {NUM_SCALES}", 'fusion.attn_w2'
        )
    shape = aligned[0].shape
    for tensor in aligned:
        if tensor.shape != shape:
            raise DimensionError(f"карты внимания разной формы: {tensor.shape} и {shape}")

    total = aligned[0]
    for tensor in aligned[1:]:
        total = ops.add(total, tensor)
    mean_map = ops.scale(total, 1.0 / len(aligned))

    pooled = ops.global_avg_pool(mean_map)
    hidden = ops.relu(ops.dense(pooled, params.attn_w1, params.attn_b1))
    return AttentionWeights(ops.sigmoid(ops.dense(hidden, params.attn_w2, params.attn_b2)))


def fuse(aligned: Sequence[Tensor], weights: AttentionWeights) -> Tensor:
    """
    Взвешенная сумма масштабов: F_fused = Σ w_i·F_i'

    Args:
        aligned: Четыре выровненные карты [B, D, H, W]
        weights: Веса масштабов [B, 4] или [1, 4]

    Returns:
        Слитая карта [B, D, H, W]
    """
    if len(aligned) != NUM_SCALES:
        raise DimensionError(f"ожидается {NUM_SCALES} карты, получено {len(aligned)}")
    batch = aligned[0].shape[0]
    if weights.values.shape[0] not in (1, batch):
        raise DimensionError(f"веса {weights.values.shape} для батча {batch}")

    fused = None
    for index, tensor in enumerate(aligned):
        w_i = ops.reshape(ops.take(weights.values, (slice(None), index)), (-1, 1, 1, 1))
        term = ops.mul(w_i, tensor)
        fused = term if fused is None else ops.add(fused, term)
    return fused


@dataclass
class FusionOutput:
    """
    Результат блока слияния

    Attributes:
        projected: Карты после проекции
        aligned: Выровненные карты
        weights: Веса масштабов
        fused: Слитая карта
    """
    projected: List[Tensor]
    aligned: List[Tensor]
    weights: AttentionWeights
    fused: Tensor = field(repr=False)


def fusion_forward(pyramid: FeaturePyramid, params: FusionParams, mode: Mode = 'train') -> FusionOutput:
    """Проекция, выравнивание, внимание и слияние за один вызов"""
    projected = project_scales(pyramid, params, mode)
    aligned = align_scales(projected)
    weights = scale_attention(aligned, params)
    return FusionOutput(projected, aligned, weights, fuse(aligned, weights))
