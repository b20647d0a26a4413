"""
Проверка градиентов всей целевой функции

Игрушечный экземпляр: случайная пирамида, слияние, обе головы и три
потери с весами DWA по умолчанию.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from autodiff import GradCheckReport, Tensor, grad_check
from config.run_config import GradCheckConfig
from model.fusion import FeaturePyramid, NUM_SCALES, fusion_forward
from model.semantics import PseudoLabelMap, pseudo_labels

from .losses import FidiConfig
from .objective import ObjectiveConfig, VisNetParams, compute_losses
from .schedule import NUM_TASKS, total_loss


@dataclass
class GradCheckProblem:
    """
    Экземпляр для проверки

    Attributes:
        params: Параметры по именам
        objective: Скалярная функция параметров без побочных эффектов
        labels: Зафиксированные псевдометки
    """
    params: Dict[str, Tensor]
    objective: Callable[[], Tensor]
    labels: PseudoLabelMap


def build_grad_check_problem(cfg: GradCheckConfig) -> GradCheckProblem:
    """
    Строит игрушечный экземпляр

    Смещения перед батч-нормализацией отключены: в режиме train их
    градиент тождественно равен нулю. Псевдометки и маска dropout
    фиксируются, чтобы функция была чистой.

    Args:
        cfg: Настройки проверки

    Returns:
        Экземпляр
    """
    rng = np.random.default_rng(cfg.seed)
    batch = cfg.num_ids * cfg.per_id
    height, width = cfg.stage4_size
    stages = []
    for index, channels in enumerate(cfg.stage_channels):
        factor = 2 ** (NUM_SCALES - 1 - index)
        stages.append(Tensor(rng.normal(size=(batch, channels, height * factor, width * factor))))
    pyramid = FeaturePyramid(stages)

    pids = [pid for pid in range(cfg.num_ids) for _ in range(cfg.per_id)]
    params = VisNetParams.initialize(
        rng,
        stage_channels=cfg.stage_channels,
        dim=cfg.dim,
        attention_hidden=cfg.attention_hidden,
        num_classes=cfg.num_ids,
        semantic_hidden=cfg.semantic_hidden,
        projection_bias=False,
        hidden_bias=False,
    )
    labels = pseudo_labels(fusion_forward(pyramid, params.fusion, 'train').fused)
    objective_cfg = ObjectiveConfig(label_smoothing=cfg.label_smoothing, fidi=FidiConfig(alpha=cfg.alpha))
    weights = (1.0 / NUM_TASKS,) * NUM_TASKS

    def objective() -> Tensor:
        dropout_rng = np.random.default_rng([cfg.seed, 7])
        out = compute_losses(params, pyramid, pids, pids, objective_cfg, 'train', dropout_rng, labels)
        return total_loss(out.losses, weights)

    return GradCheckProblem(params=params.named_parameters(), objective=objective, labels=labels)


def corrupting_hook(name: str, gradient: np.ndarray) -> np.ndarray:
    """Портит аналитический градиент: сдвиг всех элементов на 1"""
    return gradient + 1.0


def run_grad_check(cfg: GradCheckConfig, logger: Optional[logging.Logger] = None) -> GradCheckReport:
    """
    Проверка градиентов по настройкам команды

    Args:
        cfg: Настройки
        logger: Логгер

    Returns:
        Отчет
    """
    problem = build_grad_check_problem(cfg)
    hook = corrupting_hook if cfg.corrupt_gradient else None
    return grad_check(problem.objective, problem.params, step=cfg.step, gradient_hook=hook, logger=logger)
