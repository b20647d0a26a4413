"""
Обучение

Этот пакет содержит:
- losses.py - CE со сглаживанием, FIDI, семантическая CE
- schedule.py - динамическое взвешивание потерь (DWA)
- sampling.py - манифест датасета и PK-батчи
- synthetic.py - синтетический датасет и замороженный stem
- objective.py - параметры и прямой проход до трех потерь
- checks.py - проверка градиентов целевой функции
- trainer.py - демонстрационное обучение
"""

from .losses import FidiConfig, PairSet, ce_label_smoothing, fidi_pair_term, fidi_loss, semantic_loss
from .schedule import DWAState, DynamicWeightAveraging, dwa_update, softmax_weights, total_loss, append_weight_row
from .sampling import (
    ManifestRecord,
    DatasetManifest,
    BatchSpec,
    PKSampler,
    load_manifest,
    pk_batches,
    describe_batches,
)
from .objective import VisNetParams, ObjectiveConfig, compute_losses
from .checks import build_grad_check_problem, run_grad_check
from .trainer import DemoTrainer, TrainResult

__all__ = [
    'FidiConfig',
    'PairSet',
    'ce_label_smoothing',
    'fidi_pair_term',
    'fidi_loss',
    'semantic_loss',
    'DWAState',
    'DynamicWeightAveraging',
    'dwa_update',
    'softmax_weights',
    'total_loss',
    'append_weight_row',
    'ManifestRecord',
    'DatasetManifest',
    'BatchSpec',
    'PKSampler',
    'load_manifest',
    'pk_batches',
    'describe_batches',
    'VisNetParams',
    'ObjectiveConfig',
    'compute_losses',
    'build_grad_check_problem',
    'run_grad_check',
    'DemoTrainer',
    'TrainResult',
]
