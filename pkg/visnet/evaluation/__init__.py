"""
Оценка поиска

Этот пакет содержит:
- retrieval.py - нормализация, расстояния, CMC/mAP, переборный AP
"""

from .retrieval import (
    SampleMeta,
    EmbeddingSet,
    RankingReport,
    l2_normalize,
    distance_matrix,
    cmc_map,
    ap_oracle,
    average_precision,
    write_ap_file,
)

__all__ = [
    'SampleMeta',
    'EmbeddingSet',
    'RankingReport',
    'l2_normalize',
    'distance_matrix',
    'cmc_map',
    'ap_oracle',
    'average_precision',
    'write_ap_file',
]
