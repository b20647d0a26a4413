"""
Ядро тензорной арифметики

Этот пакет содержит:
- tensor.py - тензор, лента и обратный проход
- ops.py - дифференцируемые операции
- gradcheck.py - проверка градиентов конечными разностями
"""

from .tensor import Tensor, Tape, backward, current_tape, as_tensor
from .gradcheck import grad_check, GradCheckReport, relative_error
from . import ops

__all__ = [
    'Tensor',
    'Tape',
    'backward',
    'current_tape',
    'as_tensor',
    'grad_check',
    'GradCheckReport',
    'relative_error',
    'ops',
]
