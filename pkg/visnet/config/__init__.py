"""
Конфигурационные модули VisNet

Этот пакет содержит все настройки приложения:
- settings.py - основные настройки
- architecture.py - описание архитектуры для подсчета параметров
- run_config.py - настройки команд CLI
"""

from .settings import Settings, settings
from .architecture import (
    ArchSpec,
    ComponentSpec,
    LayerSpec,
    DERIVABLE_COMPONENTS,
    default_arch_spec,
    load_arch_spec,
    parse_arch_spec,
)
from .run_config import (
    ParamCountConfig,
    GradCheckConfig,
    TrainDemoConfig,
    EvalConfig,
    AugmentRunConfig,
    SampleConfig,
    TransformRunConfig,
    RunConfig,
    load_run_config,
    check_field_value,
)

__all__ = [
    'Settings',
    'settings',
    'ArchSpec',
    'ComponentSpec',
    'LayerSpec',
    'DERIVABLE_COMPONENTS',
    'default_arch_spec',
    'load_arch_spec',
    'parse_arch_spec',
    'ParamCountConfig',
    'GradCheckConfig',
    'TrainDemoConfig',
    'EvalConfig',
    'AugmentRunConfig',
    'SampleConfig',
    'TransformRunConfig',
    'RunConfig',
    'load_run_config',
    'check_field_value',
]
