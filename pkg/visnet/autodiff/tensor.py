"""
Модуль тензора и ленты дифференцирования

Содержит плотный тензор двойной точности и ленту обратного режима:
операции записываются на активную ленту, обратный проход идет по ней
в обратном порядке ровно один раз.
"""

import contextvars
import itertools
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from utils.errors import DimensionError, TapeError, TapeRankError, TapeReuseError


ArrayLike = Union[np.ndarray, Sequence, float, int]

# Локальные градиенты: градиент по выходу -> градиенты по входам
BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_node_ids = itertools.count()
_active_tape: contextvars.ContextVar[Optional['Tape']] = contextvars.ContextVar(
    'visnet_active_tape', default=None
)


class Tensor:
    """
    Плотный тензор вещественных чисел

    Данные хранятся построчно в float64; grad, если есть, той же формы.
    """

    __slots__ = ('data', 'requires_grad', 'grad', 'node_id', 'name')

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        name: Optional[str] = None
    ):
        """
        Инициализация тензора

        Args:
            data: Значения (копируются в float64)
            requires_grad: Накапливать ли градиент
            name: Имя для отчетов
        """
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.node_id = next(_node_ids)
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        """Значение скалярного тензора"""
        if self.data.size != 1:
            raise DimensionError(f"item() для тензора формы {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        """Копия данных"""
        return self.data.copy()

    def detach(self) -> 'Tensor':
        """Тензор с теми же данными вне ленты"""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        """Сбрасывает накопленный градиент"""
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ''
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # Арифметика делегируется в ops, чтобы операции попадали на ленту
    def __add__(self, other):
        from . import ops
        return ops.add(self, as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, as_tensor(other))

    def __rsub__(self, other):
        from . import ops
        return ops.sub(as_tensor(other), self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, as_tensor(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, as_tensor(other))

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)


def as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    """
    Приводит значение к тензору-константе

    Args:
        value: Тензор или массив

    Returns:
        Тот же тензор или новая константа
    """
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


@dataclass
class TapeEntry:
    """
    Запись операции на ленте

    Attributes:
        op: Имя операции
        inputs: Входные тензоры
        output: Выходной тензор
        rule: Правило локальных градиентов
    """
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    rule: BackwardRule


class Tape:
    """
    Лента обратного режима

    Операции записываются в топологическом порядке, пока лента активна
    (`with Tape() as tape:`). Лента привязана к контексту исполнения
    и допускает ровно один обратный проход.
    """

    def __init__(self):
        """Инициализация пустой ленты"""
        self.entries: List[TapeEntry] = []
        self._outputs: Dict[int, TapeEntry] = {}
        self._consumed = False
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> 'Tape':
        if self._consumed:
            raise TapeReuseError("Лента уже использована обратным проходом")
        if self._token is not None:
            raise TapeError("Лента уже активна")
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _active_tape.reset(self._token)
        self._token = None
        return False

    @property
    def consumed(self) -> bool:
        return self._consumed

    def __len__(self) -> int:
        return len(self.entries)

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor, rule: BackwardRule):
        """
        Записывает операцию на ленту

        Args:
            op: Имя операции
            inputs: Входные тензоры
            output: Выход операции
            rule: Правило локальных градиентов
        """
        if self._consumed:
            raise TapeReuseError("Запись на использованную ленту")
        entry = TapeEntry(op=op, inputs=tuple(inputs), output=output, rule=rule)
        self.entries.append(entry)
        self._outputs[output.node_id] = entry

    def produced(self, tensor: Tensor) -> bool:
        """Проверяет, записан ли тензор на этой ленте как выход операции"""
        return tensor.node_id in self._outputs


def current_tape() -> Optional[Tape]:
    """Возвращает активную ленту текущего контекста"""
    return _active_tape.get()


def record_op(
    op: str,
    inputs: Sequence[Tensor],
    out_data: np.ndarray,
    rule: BackwardRule
) -> Tensor:
    """
    Оборачивает результат операции в тензор и записывает его на ленту

    Запись происходит, только если лента активна и хотя бы один вход
    требует градиента.

    Args:
        op: Имя операции
        inputs: Входы
        out_data: Результат прямого прохода
        rule: Правило локальных градиентов

    Returns:
        Выходной тензор
    """
    tape = _active_tape.get()
    needs_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor.__new__(Tensor)
    out.data = out_data if out_data.dtype == np.float64 else out_data.astype(np.float64)
    out.requires_grad = needs_grad
    out.grad = None
    out.node_id = next(_node_ids)
    out.name = None
    if needs_grad:
        tape.record(op, inputs, out, rule)
    return out


def backward(tape: Tape, root: Tensor) -> Dict[int, np.ndarray]:
    """
    Обратный проход по ленте

    Градиенты листьев (тензоров с requires_grad, не произведенных лентой)
    накапливаются в их поле grad; ветвления суммируются.

    Args:
        tape: Лента прямого прохода
        root: Скалярный выход

    Returns:
        Градиенты листьев по node_id
    """
    if tape.consumed:
        raise TapeReuseError("Повторный обратный проход по ленте")
    if root.data.size != 1:
        raise TapeRankError(f"Корень обратного прохода должен быть скаляром, форма {root.shape}")
    if not tape.produced(root):
        raise TapeError("Корень не записан на этой ленте")

    tape._consumed = True

    grads: Dict[int, np.ndarray] = {root.node_id: np.ones_like(root.data)}
    leaves: Dict[int, Tensor] = {}

    for entry in reversed(tape.entries):
        grad_out = grads.pop(entry.output.node_id, None)
        if grad_out is None:
            continue
        input_grads = entry.rule(grad_out)
        for tensor, grad in zip(entry.inputs, input_grads):
            if grad is None or not tensor.requires_grad:
                continue
            if grad.shape != tensor.data.shape:
                raise DimensionError(
                    f"{entry.op}: градиент формы {grad.shape} для входа формы {tensor.data.shape}"
                )
            if tensor.node_id in grads:
                grads[tensor.node_id] = grads[tensor.node_id] + grad
            else:
                grads[tensor.node_id] = grad
            if not tape.produced(tensor):
                leaves[tensor.node_id] = tensor

    result: Dict[int, np.ndarray] = {}
    for node_id, leaf in leaves.items():
        grad = grads.get(node_id)
        if grad is None:
            continue
        leaf.grad = grad.copy() if leaf.grad is None else leaf.grad + grad
        result[node_id] = grad
    return result
