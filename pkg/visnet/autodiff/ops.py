"""
Дифференцируемые операции

Каждая операция считает прямой проход на numpy и, если лента активна,
записывает правило локальных градиентов. Набор операций замкнут:
любая их композиция дифференцируется без обходных путей.
"""

from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import settings
from utils.errors import DegenerateBatchError, DimensionError

from .tensor import Tensor, as_tensor, record_op


Mode = Literal['train', 'eval']

BN_MOMENTUM = settings.bn_momentum
BN_EPS = settings.bn_eps

Axis = Optional[Union[int, Tuple[int, ...]]]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """
    Сворачивает градиент обратно к форме входа после broadcasting

    Args:
        grad: Градиент по выходу
        shape: Форма входа

    Returns:
        Градиент формы shape
    """
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for dim, extent in enumerate(shape):
        if extent == 1 and grad.shape[dim] != 1:
            grad = grad.sum(axis=dim, keepdims=True)
    return grad


# === Поэлементная арифметика ===

def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data
    return record_op(
        'add', (a, b), out,
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data
    return record_op(
        'sub', (a, b), out,
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data
    return record_op(
        'mul', (a, b), out,
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape))
    )


def div(a: Tensor, b: Tensor) -> Tensor:
    out = a.data / b.data
    return record_op(
        'div', (a, b), out,
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        )
    )


def scale(x: Tensor, factor: float) -> Tensor:
    """Умножение на константу"""
    factor = float(factor)
    return record_op('scale', (x,), x.data * factor, lambda g: (g * factor,))


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return record_op('exp', (x,), out, lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    return record_op('log', (x,), np.log(x.data), lambda g: (g / x.data,))


def sqrt(x: Tensor) -> Tensor:
    out = np.sqrt(x.data)
    return record_op('sqrt', (x,), out, lambda g: (g * 0.5 / out,))


def relu(x: Tensor) -> Tensor:
    """ReLU; субградиент в нуле равен нулю"""
    active = x.data > 0
    out = np.where(active, x.data, 0.0)
    return record_op('relu', (x,), out, lambda g: (g * active,))


def sigmoid(x: Tensor) -> Tensor:
    e = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return record_op('sigmoid', (x,), out, lambda g: (g * out * (1.0 - out),))


def clip(x: Tensor, low: float, high: float) -> Tensor:
    """Ограничение значений; вне [low, high] градиент нулевой"""
    inside = (x.data >= low) & (x.data <= high)
    out = np.clip(x.data, low, high)
    return record_op('clip', (x,), out, lambda g: (g * inside,))


# === Редукции и форма ===

def _expand_reduced(g: np.ndarray, shape: Tuple[int, ...], axis: Axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        axes = (axis,) if isinstance(axis, int) else axis
        axes = tuple(a % len(shape) for a in axes)
        for a in sorted(axes):
            g = np.expand_dims(g, a)
    return np.broadcast_to(g, shape).copy()


def sum(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    out = np.sum(x.data, axis=axis, keepdims=keepdims)
    return record_op(
        'sum', (x,), np.asarray(out),
        lambda g: (_expand_reduced(g, x.shape, axis, keepdims),)
    )


def mean(x: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    out = np.mean(x.data, axis=axis, keepdims=keepdims)
    count = x.data.size // max(np.asarray(out).size, 1)
    return record_op(
        'mean', (x,), np.asarray(out),
        lambda g: (_expand_reduced(g, x.shape, axis, keepdims) / count,)
    )


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    out = x.data.reshape(shape)
    return record_op('reshape', (x,), out, lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return record_op(
        'transpose', (x,), np.transpose(x.data, axes),
        lambda g: (np.transpose(g, inverse),)
    )


def take(x: Tensor, index) -> Tensor:
    """
    Выборка по индексам (numpy fancy indexing)

    Args:
        x: Тензор
        index: Индекс: массив, срез или кортеж массивов

    Returns:
        Выбранные элементы
    """
    out = np.array(x.data[index])

    def rule(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return record_op('take', (x,), out, rule)


def stack(tensors: Sequence[Tensor]) -> Tensor:
    """Склеивает тензоры одной формы по новой первой оси"""
    out = np.stack([t.data for t in tensors])
    return record_op(
        'stack', tuple(tensors), out,
        lambda g: tuple(g[i] for i in range(len(tensors)))
    )


# === Линейные слои ===

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: формы {a.shape} и {b.shape} несовместимы")
    out = a.data @ b.data
    return record_op('matmul', (a, b), out, lambda g: (g @ b.data.T, a.data.T @ g))


def dense(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    Аффинный слой: x @ W^T + b

    Args:
        x: Вход [N, in]
        weight: Веса [out, in]
        bias: Смещение [out] или None

    Returns:
        Выход [N, out]
    """
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise DimensionError(f"dense: вход {x.shape}, веса {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise DimensionError(f"dense: смещение {bias.shape} для {weight.shape[0]} выходов")

    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data
        inputs: Tuple[Tensor, ...] = (x, weight, bias)
    else:
        inputs = (x, weight)

    def rule(g):
        grads = [g @ weight.data, g.T @ x.data]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return grads

    return record_op('dense', inputs, out, rule)


def conv1x1_forward(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    Свертка 1×1

    out[b,o,h,w] = Σ_c weight[o,c]·x[b,c,h,w] (+ bias[o])

    Args:
        x: Вход [B, C_in, H, W]
        weight: Веса [C_out, C_in]
        bias: Смещение [C_out] или None

    Returns:
        Выход [B, C_out, H, W]
    """
    if x.ndim != 4:
        raise DimensionError(f"conv1x1: ожидается вход ранга 4, получено {x.shape}")
    if weight.ndim != 2 or weight.shape[1] != x.shape[1]:
        raise DimensionError(
            f"conv1x1: веса {weight.shape} не согласованы с {x.shape[1]} входными каналами"
        )
    if bias is not None and bias.shape != (weight.shape[0],):
        raise DimensionError(f"conv1x1: смещение {bias.shape} для {weight.shape[0]} каналов")

    out = np.einsum('oc,bchw->bohw', weight.data, x.data, optimize=True)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
        inputs: Tuple[Tensor, ...] = (x, weight, bias)
    else:
        inputs = (x, weight)

    def rule(g):
        grads = [
            np.einsum('oc,bohw->bchw', weight.data, g, optimize=True),
            np.einsum('bohw,bchw->oc', g, x.data, optimize=True),
        ]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    return record_op('conv1x1', inputs, out, rule)


# === Нормализация ===

@dataclass
class RunningStats:
    """
    Скользящие статистики батч-нормализации

    Attributes:
        mean: Скользящее среднее по каналам
        var: Скользящая дисперсия по каналам
        momentum: Вес нового батча
    """
    mean: np.ndarray
    var: np.ndarray
    momentum: float = BN_MOMENTUM

    @classmethod
    def fresh(cls, channels: int, momentum: float = BN_MOMENTUM) -> 'RunningStats':
        """Начальные статистики (0, 1)"""
        return cls(mean=np.zeros(channels), var=np.ones(channels), momentum=momentum)

    def update(self, batch_mean: np.ndarray, batch_var_unbiased: np.ndarray):
        m = self.momentum
        self.mean = (1.0 - m) * self.mean + m * batch_mean
        self.var = (1.0 - m) * self.var + m * batch_var_unbiased


def _bn_axes(x: Tensor) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    if x.ndim == 2:
        return (0,), (1, -1)
    if x.ndim == 4:
        return (0, 2, 3), (1, -1, 1, 1)
    raise DimensionError(f"batchnorm: ожидается ранг 2 или 4, получено {x.shape}")


def batchnorm_forward(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    eps: float = BN_EPS,
    mode: Mode = 'train',
    running_stats: Optional[RunningStats] = None
) -> Tensor:
    """
    Батч-нормализация по каналам

    В режиме train нормирует по статистикам батча и, если переданы
    running_stats, обновляет их с моментом; в режиме eval использует
    скользящие статистики.

    Args:
        x: Вход [N, C] или [B, C, H, W]
        gamma: Масштаб [C]
        beta: Сдвиг [C]
        eps: Стабилизатор дисперсии
        mode: 'train' или 'eval'
        running_stats: Скользящие статистики

    Returns:
        Нормализованный тензор той же формы
    """
    if eps <= 0:
        raise ValueError(f"batchnorm: eps должен быть положительным, получено {eps}")
    axes, bshape = _bn_axes(x)
    channels = x.shape[1]
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise DimensionError(
            f"batchnorm: gamma {gamma.shape}, beta {beta.shape} для {channels} каналов"
        )

    g_b = gamma.data.reshape(bshape)

    if mode == 'eval':
        if running_stats is None:
            raise ValueError("batchnorm: режим eval требует скользящих статистик")
        inv_std = 1.0 / np.sqrt(running_stats.var + eps)
        xhat = (x.data - running_stats.mean.reshape(bshape)) * inv_std.reshape(bshape)
        out = g_b * xhat + beta.data.reshape(bshape)

        def eval_rule(g):
            return (
                g * g_b * inv_std.reshape(bshape),
                (g * xhat).sum(axis=axes),
                g.sum(axis=axes),
            )

        return record_op('batchnorm', (x, gamma, beta), out, eval_rule)

    if mode != 'train':
        raise ValueError(f"batchnorm: неизвестный режим {mode!r}")

    count = x.data.size // channels
    if count < 2:
        raise DegenerateBatchError(
            f"batchnorm: {count} значение на канал, дисперсия батча не определена"
        )

    mu = x.data.mean(axis=axes)
    var = x.data.var(axis=axes)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu.reshape(bshape)) * inv_std.reshape(bshape)
    out = g_b * xhat + beta.data.reshape(bshape)

    if running_stats is not None:
        running_stats.update(mu, var * count / (count - 1))

    def train_rule(g):
        g_mean = g.mean(axis=axes, keepdims=True)
        gx_mean = (g * xhat).mean(axis=axes, keepdims=True)
        dx = g_b * inv_std.reshape(bshape) * (g - g_mean - xhat * gx_mean)
        return dx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    return record_op('batchnorm', (x, gamma, beta), out, train_rule)


# === Пространственные операции ===

def interpolation_matrix(out_size: int, in_size: int) -> np.ndarray:
    """
    Матрица билинейной интерполяции по одной оси

    Соглашение о центрах пикселей: src = (dst + 0.5)·in/out − 0.5,
    с отсечением к границам.

    Args:
        out_size: Размер выхода
        in_size: Размер входа

    Returns:
        Матрица [out_size, in_size], строки суммируются в 1
    """
    matrix = np.zeros((out_size, in_size))
    dst = np.arange(out_size, dtype=np.float64)
    src = (dst + 0.5) * in_size / out_size - 0.5
    src = np.clip(src, 0.0, in_size - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, in_size - 1)
    frac = src - i0
    rows = np.arange(out_size)
    np.add.at(matrix, (rows, i0), 1.0 - frac)
    np.add.at(matrix, (rows, i1), frac)
    return matrix


def bilinear_resize(x: Tensor, target: Tuple[int, int]) -> Tensor:
    """
    Билинейная передискретизация в обе стороны (без сглаживания)

    Args:
        x: Вход [B, C, h, w]
        target: Целевой размер (H, W)

    Returns:
        Выход [B, C, H, W]; при совпадении размеров данные не меняются
    """
    if x.ndim != 4:
        raise DimensionError(f"bilinear: ожидается вход ранга 4, получено {x.shape}")
    height, width = int(target[0]), int(target[1])
    if height <= 0 or width <= 0:
        raise DimensionError(f"bilinear: некорректный целевой размер {target}")
    h, w = x.shape[2], x.shape[3]
    if (height, width) == (h, w):
        return record_op('resize', (x,), x.data.copy(), lambda g: (g,))

    a_h = interpolation_matrix(height, h)
    a_w = interpolation_matrix(width, w)
    out = a_h @ x.data @ a_w.T
    return record_op('resize', (x,), out, lambda g: (a_h.T @ g @ a_w,))


def bilinear_upsample(x: Tensor, target: Tuple[int, int]) -> Tensor:
    """
    Билинейное увеличение карты признаков

    Args:
        x: Вход [B, C, h, w]
        target: Целевой размер (H, W), H ≥ h, W ≥ w

    Returns:
        Выход [B, C, H, W]
    """
    if x.ndim != 4:
        raise DimensionError(f"bilinear: ожидается вход ранга 4, получено {x.shape}")
    if target[0] < x.shape[2] or target[1] < x.shape[3]:
        raise DimensionError(
            f"bilinear_upsample: уменьшение {x.shape[2:]} -> {tuple(target)} не поддерживается"
        )
    return bilinear_resize(x, target)


def global_avg_pool(x: Tensor) -> Tensor:
    """
    Глобальное усреднение по пространству

    Args:
        x: Вход [B, C, H, W]

    Returns:
        Выход [B, C]
    """
    if x.ndim != 4:
        raise DimensionError(f"GAP: ожидается вход ранга 4, получено {x.shape}")
    area = x.shape[2] * x.shape[3]
    out = x.data.mean(axis=(2, 3))
    return record_op(
        'gap', (x,), out,
        lambda g: (np.broadcast_to(g[:, :, None, None] / area, x.shape).copy(),)
    )


# === Классификация ===

def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    probs = np.exp(out)
    return record_op(
        'log_softmax', (x,), out,
        lambda g: (g - probs * g.sum(axis=axis, keepdims=True),)
    )


def softmax(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """Softmax без ленты"""
    shifted = values - values.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def dropout(x: Tensor, rate: float, rng: Optional[np.random.Generator], mode: Mode) -> Tensor:
    """
    Dropout с обратным масштабированием

    В режиме eval и при rate == 0 вход возвращается без изменений.

    Args:
        x: Вход
        rate: Доля обнуляемых элементов
        rng: Генератор случайных чисел (обязателен в train)
        mode: 'train' или 'eval'

    Returns:
        Тензор той же формы
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout: rate вне [0, 1): {rate}")
    if mode == 'eval' or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout: режим train требует генератор")
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, Tensor(mask))



__all__ = [
    'Mode', 'RunningStats', 'as_tensor',
    'add', 'sub', 'mul', 'div', 'scale', 'exp', 'log', 'sqrt', 'relu', 'sigmoid', 'clip',
    'sum', 'mean', 'reshape', 'transpose', 'take', 'stack',
    'matmul', 'dense', 'conv1x1_forward', 'batchnorm_forward',
    'interpolation_matrix', 'bilinear_resize', 'bilinear_upsample', 'global_avg_pool',
    'log_softmax', 'softmax', 'dropout',
]
