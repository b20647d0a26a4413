"""
Функции потерь

Три потери обучения, все дифференцируемы на ленте:
- кросс-энтропия идентичностей со сглаживанием меток
- FIDI: симметричная α-дивергенция между распределением "та же
  личность / другая" и выученным отношением пары
- семантическая кросс-энтропия по позициям
"""

import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from autodiff import Tensor, ops
from model.semantics import NUM_SEMANTIC_CLASSES, PseudoLabelMap
from utils.errors import ConfigurationError, DegenerateBatchWarning, DimensionError


# Добавка под корнем расстояния: конечный градиент при нулевом расстоянии
DISTANCE_EPS = 1e-12


@dataclass
class FidiConfig:
    """
    Настройки FIDI

    Attributes:
        alpha: Порядок дивергенции (> 1)
        scale: Масштаб s в u = sigmoid((m − d)/s)
        margin: Сдвиг m
        clamp_eps: Отсечение u к [eps, 1 − eps]
    """
    alpha: float = 2.0
    scale: float = 0.25
    margin: float = 1.0
    clamp_eps: float = 1e-7

    def __post_init__(self):
        if not self.alpha > 1.0:
            raise ConfigurationError(f"alpha должен быть > 1, получено {self.alpha}", 'fidi.alpha')
        if not self.scale > 0.0:
            raise ConfigurationError(f"scale должен быть > 0, получено {self.scale}", 'fidi.scale')
        if not 0.0 < self.clamp_eps < 0.5:
            raise ConfigurationError(f"clamp_eps вне (0, 0.5): {self.clamp_eps}", 'fidi.clamp_eps')


@dataclass
class PairSet:
    """
    Все неупорядоченные пары батча

    Attributes:
        first: Индексы i (i < j)
        second: Индексы j
        same: Истинное отношение k (1 - та же личность)
    """
    first: np.ndarray
    second: np.ndarray
    same: np.ndarray

    @classmethod
    def from_ids(cls, ids: Sequence[int]) -> 'PairSet':
        ids = np.asarray(ids)
        first, second = np.triu_indices(len(ids), k=1)
        same = (ids[first] == ids[second]).astype(np.float64)
        return cls(first=first, second=second, same=same)

    def __len__(self) -> int:
        return len(self.first)

    @property
    def num_positive(self) -> int:
        return int(self.same.sum())

    @property
    def num_negative(self) -> int:
        return len(self) - self.num_positive


def ce_label_smoothing(logits: Tensor, targets: Sequence[int], eps: float = 0.1) -> Tensor:
    """
    Кросс-энтропия со сглаживанием меток

    q = (1 − eps)·onehot + eps/N; loss = −mean_b Σ_c q_c·log softmax_c.

    Args:
        logits: Логиты [B, N]
        targets: Номера классов [B]
        eps: Сглаживание в [0, 1)

    Returns:
        Скалярная потеря
    """
    if not 0.0 <= eps < 1.0:
        raise ConfigurationError(f"eps вне [0, 1): {eps}", 'label_smoothing')
    if logits.ndim != 2:
        raise DimensionError(f"ожидаются логиты [B, N], получено {logits.shape}")
    batch, classes = logits.shape
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if targets.shape[0] != batch:
        raise DimensionError(f"{targets.shape[0]} меток для {batch} строк логитов")
    if np.any(targets < 0) or np.any(targets >= classes):
        bad = targets[(targets < 0) | (targets >= classes)][0]
        raise ValueError(f"метка {bad} вне диапазона [0, {classes})")

    q = np.full((batch, classes), eps / classes)
    q[np.arange(batch), targets] += 1.0 - eps
    log_probs = ops.log_softmax(logits, axis=1)
    return ops.scale(ops.sum(ops.mul(log_probs, Tensor(q))), -1.0 / batch)


def fidi_pair_term(
    u: Union[float, np.ndarray],
    k: Union[int, np.ndarray],
    alpha: float = 2.0,
    clamp_eps: float = 1e-7
) -> Union[float, np.ndarray]:
    """
    Слагаемое FIDI одной пары

    u·log(αu/((α−1)u + k)) + k·log(αk/((α−1)k + u)); при k = 0 второе
    слагаемое равно нулю.

    Args:
        u: Выученное отношение в (0, 1)
        k: Истинное отношение 0 или 1
        alpha: Порядок дивергенции
        clamp_eps: Отсечение u

    Returns:
        Значение (скаляр или массив)
    """
    if not alpha > 1.0:
        raise ConfigurationError(f"alpha должен быть > 1, получено {alpha}", 'fidi.alpha')
    u = np.clip(np.asarray(u, dtype=np.float64), clamp_eps, 1.0 - clamp_eps)
    k = np.asarray(k, dtype=np.float64)
    forward = u * np.log(alpha * u / ((alpha - 1.0) * u + k))
    with np.errstate(divide='ignore', invalid='ignore'):
        reverse = np.where(k > 0, k * np.log(alpha * k / ((alpha - 1.0) * k + u)), 0.0)
    value = forward + reverse
    return float(value) if value.ndim == 0 else value


def pair_relationship(embeddings: Tensor, pairs: PairSet, cfg: FidiConfig) -> Tensor:
    """
    Выученное отношение пар u = sigmoid((m − d)/s)

    d - евклидово расстояние единичных эмбеддингов.

    Args:
        embeddings: Эмбеддинги [B, D]
        pairs: Пары батча
        cfg: Настройки FIDI

    Returns:
        u для всех пар, отсеченное к [eps, 1 − eps]
    """
    squared = ops.sum(ops.mul(embeddings, embeddings), axis=1, keepdims=True)
    unit = ops.div(embeddings, ops.sqrt(ops.add(squared, Tensor(DISTANCE_EPS))))
    gram = ops.matmul(unit, ops.transpose(unit, (1, 0)))
    cosine = ops.take(gram, (pairs.first, pairs.second))
    dist_sq = ops.clip(ops.sub(Tensor(2.0), ops.scale(cosine, 2.0)), 0.0, np.inf)
    dist = ops.sqrt(ops.add(dist_sq, Tensor(DISTANCE_EPS)))
    logits = ops.scale(ops.sub(Tensor(cfg.margin), dist), 1.0 / cfg.scale)
    return ops.clip(ops.sigmoid(logits), cfg.clamp_eps, 1.0 - cfg.clamp_eps)


def fidi_loss(embeddings: Tensor, ids: Sequence[int], cfg: FidiConfig = None) -> Tensor:
    """
    FIDI: среднее слагаемых по всем парам батча

    Args:
        embeddings: Эмбеддинги [B, D]
        ids: Личности [B]
        cfg: Настройки FIDI

    Returns:
        Скалярная потеря
    """
    cfg = cfg or FidiConfig()
    if embeddings.ndim != 2 or embeddings.shape[0] < 2:
        raise DimensionError(f"FIDI требует хотя бы два эмбеддинга [B, D], получено {embeddings.shape}")
    if len(ids) != embeddings.shape[0]:
        raise DimensionError(f"{len(ids)} меток для {embeddings.shape[0]} эмбеддингов")

    pairs = PairSet.from_ids(ids)
    if pairs.num_positive == 0 or pairs.num_negative == 0:
        warnings.warn(
            f"батч без {'положительных' if pairs.num_positive == 0 else 'отрицательных'} пар",
            DegenerateBatchWarning,
            stacklevel=2,
        )

    u = pair_relationship(embeddings, pairs, cfg)
    k = Tensor(pairs.same)
    alpha = cfg.alpha

    ratio = ops.div(ops.scale(u, alpha), ops.add(ops.scale(u, alpha - 1.0), k))
    forward = ops.mul(u, ops.log(ratio))
    # k·(log α − log(α − 1 + u)); при k = 0 слагаемое и его градиент нулевые
    reverse = ops.mul(k, ops.sub(Tensor(np.log(alpha)), ops.log(ops.add(u, Tensor(alpha - 1.0)))))
    return ops.mean(ops.add(forward, reverse))


def semantic_loss(logits: Tensor, labels: Union[PseudoLabelMap, np.ndarray]) -> Tensor:
    """
    Семантическая кросс-энтропия по всем позициям (без сглаживания)

    Args:
        logits: Логиты [B·H·W, 4]
        labels: Псевдометки

    Returns:
        Скалярная потеря
    """
    flat = labels.flat() if isinstance(labels, PseudoLabelMap) else np.asarray(labels).reshape(-1)
    if logits.ndim != 2 or logits.shape[1] != NUM_SEMANTIC_CLASSES or logits.shape[0] != flat.shape[0]:
        raise DimensionError(f"логиты {logits.shape} не согласованы с {flat.shape[0]} метками")
    return ce_label_smoothing(logits, flat, eps=0.0)
