"""
Модуль оценки поиска

Нормализация эмбеддингов, матрица расстояний, CMC и mAP по протоколу
Market-1501 (исключение совпадений с той же камерой) и независимый
переборный расчет AP для сверки.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from utils.errors import DegenerateEmbeddingError, DimensionError
from utils.logger import format_kv


REPORT_RANKS = (1, 5, 10, 20)

# Запросов на блок при расчете расстояний
DISTANCE_BLOCK = 256


@dataclass
class SampleMeta:
    """
    Метаданные строк

    Attributes:
        pids: Личности (отрицательные - мусор)
        camids: Камеры
    """
    pids: np.ndarray
    camids: np.ndarray

    def __post_init__(self):
        self.pids = np.asarray(self.pids, dtype=np.int64).reshape(-1)
        self.camids = np.asarray(self.camids, dtype=np.int64).reshape(-1)
        if self.pids.shape != self.camids.shape:
            raise DimensionError(f"{len(self.pids)} pid и {len(self.camids)} camid")

    def __len__(self) -> int:
        return len(self.pids)


@dataclass
class EmbeddingSet:
    """
    Эмбеддинги с метаданными

    Attributes:
        matrix: Матрица [N, D]
        meta: pid и camid строк
    """
    matrix: np.ndarray
    meta: SampleMeta

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise DimensionError(f"ожидается матрица [N, D], получено {self.matrix.shape}")
        if self.matrix.shape[0] != len(self.meta):
            raise DimensionError(f"{self.matrix.shape[0]} эмбеддингов и {len(self.meta)} записей метаданных")

    @classmethod
    def from_arrays(cls, matrix: np.ndarray, pids: Sequence[int], camids: Sequence[int]) -> 'EmbeddingSet':
        return cls(matrix, SampleMeta(np.asarray(pids), np.asarray(camids)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]


def l2_normalize(embeddings: EmbeddingSet) -> EmbeddingSet:
    """
    Приводит строки к единичной норме

    Args:
        embeddings: Эмбеддинги

    Returns:
        Новый набор с единичными строками
    """
    norms = np.linalg.norm(embeddings.matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DegenerateEmbeddingError("нулевая норма эмбеддинга", int(zero[0]))
    return EmbeddingSet(embeddings.matrix / norms[:, None], embeddings.meta)


def distance_matrix(query: EmbeddingSet, gallery: EmbeddingSet) -> np.ndarray:
    """
    Евклидовы расстояния запрос-галерея

    Считается по разностям векторов (без формулы 2 − 2⟨q, g⟩), блоками
    по запросам.

    Args:
        query: Запросы [nq, D]
        gallery: Галерея [ng, D]

    Returns:
        Матрица [nq, ng]
    """
    if query.dim != gallery.dim:
        raise DimensionError(f"размерность запросов {query.dim}, галереи {gallery.dim}")
    q, g = query.matrix, gallery.matrix
    dist = np.empty((q.shape[0], g.shape[0]))
    for start in range(0, q.shape[0], DISTANCE_BLOCK):
        block = q[start:start + DISTANCE_BLOCK]
        diff = block[:, None, :] - g[None, :, :]
        dist[start:start + DISTANCE_BLOCK] = np.sqrt(np.sum(diff * diff, axis=2))
    return dist


@dataclass
class QueryResult:
    """
    Итог одного запроса

    Attributes:
        ap: Средняя точность (None - запрос пропущен)
        first_hit: Позиция первого верного ответа (с нуля)
    """
    ap: Optional[float]
    first_hit: Optional[int] = None


@dataclass
class RankingReport:
    """
    Отчет поиска

    Attributes:
        cmc: Кривая CMC по рангам 1..ng
        mAP: Среднее AP по учтенным запросам
        per_query: AP по запросам в исходном порядке (None - пропущен)
        num_queries: Всего запросов
        num_skipped: Пропущено (нет положительных с других камер)
    """
    cmc: np.ndarray
    mAP: float
    per_query: List[Optional[float]] = field(default_factory=list)
    num_queries: int = 0
    num_skipped: int = 0

    @property
    def aps(self) -> List[float]:
        return [ap for ap in self.per_query if ap is not None]

    @property
    def num_valid(self) -> int:
        return self.num_queries - self.num_skipped

    def rank(self, k: int) -> float:
        """CMC(k); k больше длины галереи дает последнее значение"""
        if k < 1:
            raise ValueError(f"ранг должен быть ≥ 1: {k}")
        if self.cmc.size == 0:
            return 0.0
        return float(self.cmc[min(k, self.cmc.size) - 1])

    def summary(self) -> Dict[str, float]:
        values = {f"rank{k}": self.rank(k) for k in REPORT_RANKS}
        values['mAP'] = self.mAP
        return values

    def format_table(self) -> str:
        """Выровненная текстовая таблица"""
        lines = [f"{'metric':<8}  {'value':>8}"]
        for key, value in self.summary().items():
            lines.append(f"{key:<8}  {100.0 * value:>7.2f}%")
        lines.append(f"queries={self.num_queries} valid={self.num_valid} skipped={self.num_skipped}")
        return '\n'.join(lines)

    def format_rows(self) -> List[str]:
        """Строки key=value"""
        rows = [format_kv(metric=key, value=float(value)) for key, value in self.summary().items()]
        rows.append(format_kv(metric='queries', value=self.num_queries))
        rows.append(format_kv(metric='skipped', value=self.num_skipped))
        return rows


def average_precision(matches: np.ndarray) -> float:
    """
    AP по бинарному ранжированному списку (векторно)

    Слагаемые точности складываются через math.fsum.
    """
    positions = np.flatnonzero(matches)
    precisions = np.arange(1, positions.size + 1, dtype=np.float64) / (positions + 1).astype(np.float64)
    return math.fsum(precisions.tolist()) / positions.size


def _evaluate_query(
    dist_row: np.ndarray,
    q_pid: int,
    q_camid: int,
    g_meta: SampleMeta
) -> QueryResult:
    order = np.argsort(dist_row, kind='stable')
    g_pids = g_meta.pids[order]
    g_camids = g_meta.camids[order]
    # Та же личность с той же камеры и мусорные изображения не участвуют
    keep = ~((g_pids == q_pid) & (g_camids == q_camid)) & (g_pids >= 0)
    matches = g_pids[keep] == q_pid
    if not matches.any():
        return QueryResult(ap=None)
    return QueryResult(ap=average_precision(matches), first_hit=int(np.argmax(matches)))


def cmc_map(
    dist: np.ndarray,
    q_meta: SampleMeta,
    g_meta: SampleMeta,
    workers: int = 1,
    logger: Optional[logging.Logger] = None
) -> RankingReport:
    """
    CMC и mAP с исключением совпадений по той же камере

    Ранжирование по возрастанию расстояния, при равенстве - по индексу
    галереи. Запросы без положительных с других камер пропускаются.

    Args:
        dist: Расстояния [nq, ng]
        q_meta: Метаданные запросов
        g_meta: Метаданные галереи
        workers: Потоков для обработки запросов
        logger: Логгер

    Returns:
        Отчет
    """
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 2 or dist.shape != (len(q_meta), len(g_meta)):
        raise DimensionError(
            f"матрица {dist.shape} не согласована с {len(q_meta)} запросами и {len(g_meta)} галереей"
        )
    num_queries, num_gallery = dist.shape

    def run(q: int) -> QueryResult:
        return _evaluate_query(dist[q], int(q_meta.pids[q]), int(q_meta.camids[q]), g_meta)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(num_queries)))
    else:
        results = [run(q) for q in range(num_queries)]

    hits = np.zeros(num_gallery, dtype=np.int64)
    for result in results:
        if result.first_hit is not None:
            hits[result.first_hit] += 1

    per_query = [result.ap for result in results]
    aps = [ap for ap in per_query if ap is not None]
    num_valid = len(aps)
    if num_valid:
        cmc = np.cumsum(hits) / num_valid
        mean_ap = math.fsum(aps) / num_valid
    else:
        cmc = np.zeros(num_gallery)
        mean_ap = 0.0
        if logger:
            logger.warning("Нет запросов с положительными на других камерах")

    report = RankingReport(
        cmc=cmc,
        mAP=mean_ap,
        per_query=per_query,
        num_queries=num_queries,
        num_skipped=num_queries - num_valid,
    )
    if logger:
        logger.info(f"Оценка: rank1={report.rank(1):.4f} mAP={report.mAP:.4f} пропущено={report.num_skipped}")
    return report


def ap_oracle(relevance: Sequence[int]) -> float:
    """
    AP прямым суммированием Σ rel_k·precision@k / число положительных

    Args:
        relevance: Бинарный ранжированный список

    Returns:
        AP
    """
    hits = 0
    terms = []
    for position, rel in enumerate(relevance):
        if rel not in (0, 1, True, False):
            raise ValueError(f"релевантность должна быть 0 или 1, получено {rel!r}")
        if rel:
            hits += 1
            terms.append(hits / (position + 1))
    if hits == 0:
        raise ValueError("AP не определена: в списке нет положительных")
    return math.fsum(terms) / hits


def write_ap_file(report: RankingReport, path: Union[str, Path]):
    """
    Сохраняет AP по запросам, по строке на запрос

    Args:
        report: Отчет
        path: Путь к файлу
    """
    with open(path, 'w', encoding='utf-8') as f:
        for index, ap in enumerate(report.per_query):
            if ap is None:
                f.write(format_kv(query=index, ap='NA', skipped=1) + '\n')
            else:
                f.write(format_kv(query=index, ap=float(ap)) + '\n')
