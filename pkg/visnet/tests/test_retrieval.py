"""
Тесты оценки поиска
"""

import math

import numpy as np
import pytest

from evaluation.retrieval import (
    EmbeddingSet,
    SampleMeta,
    ap_oracle,
    average_precision,
    cmc_map,
    distance_matrix,
    l2_normalize,
    write_ap_file,
)
from utils.errors import DegenerateEmbeddingError, DimensionError


def _brute_force(dist, q_meta, g_meta):
    """Переборная оценка: сортировка sorted() по (расстояние, индекс)"""
    aps, first_hits = [], []
    for q in range(dist.shape[0]):
        order = sorted(range(dist.shape[1]), key=lambda j: (dist[q, j], j))
        relevance = []
        for j in order:
            same_view = g_meta.pids[j] == q_meta.pids[q] and g_meta.camids[j] == q_meta.camids[q]
            if same_view or g_meta.pids[j] < 0:
                continue
            relevance.append(1 if g_meta.pids[j] == q_meta.pids[q] else 0)
        if 1 in relevance:
            aps.append(ap_oracle(relevance))
            first_hits.append(relevance.index(1))
        else:
            aps.append(None)
            first_hits.append(None)
    return aps, first_hits


def _random_instance(rng, num_query=6, num_gallery=20):
    q_meta = SampleMeta(rng.integers(0, 4, num_query), rng.integers(0, 3, num_query))
    g_meta = SampleMeta(rng.integers(-1, 4, num_gallery), rng.integers(0, 3, num_gallery))
    # Целые расстояния дают равенства, на которых проверяется порядок по индексу
    dist = rng.integers(0, 6, size=(num_query, num_gallery)).astype(np.float64)
    return dist, q_meta, g_meta


# === Нормализация и расстояния ===

def test_normalize_row():
    out = l2_normalize(EmbeddingSet.from_arrays(np.array([[3.0, 4.0]]), [0], [0]))
    np.testing.assert_allclose(out.matrix, [[0.6, 0.8]], atol=1e-15)


def test_normalize_is_idempotent(rng):
    unit = l2_normalize(EmbeddingSet.from_arrays(rng.normal(size=(10, 6)), range(10), [0] * 10))
    again = l2_normalize(unit)
    np.testing.assert_allclose(again.matrix, unit.matrix, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(unit.matrix, axis=1), 1.0, atol=1e-6)


def test_zero_row_is_named():
    data = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(DegenerateEmbeddingError) as info:
        l2_normalize(EmbeddingSet.from_arrays(data, [0, 1], [0, 0]))
    assert info.value.row == 1


def test_distance_special_cases():
    query = EmbeddingSet.from_arrays(np.array([[1.0, 0.0]]), [0], [0])
    gallery = EmbeddingSet.from_arrays(np.array([[1.0, 0.0], [0.0, 1.0]]), [0, 1], [1, 1])
    dist = distance_matrix(query, gallery)
    assert dist[0, 0] == 0.0
    assert dist[0, 1] == pytest.approx(math.sqrt(2.0), abs=1e-12)


def test_distance_matches_loop_and_dot_forms(rng):
    query = l2_normalize(EmbeddingSet.from_arrays(rng.normal(size=(5, 8)), range(5), [0] * 5))
    gallery = l2_normalize(EmbeddingSet.from_arrays(rng.normal(size=(7, 8)), range(7), [1] * 7))
    dist = distance_matrix(query, gallery)
    for i in range(5):
        for j in range(7):
            loop = math.sqrt(sum((a - b) ** 2 for a, b in zip(query.matrix[i], gallery.matrix[j])))
            assert dist[i, j] == pytest.approx(loop, abs=1e-10)
    dot = np.sqrt(np.clip(2.0 - 2.0 * query.matrix @ gallery.matrix.T, 0.0, None))
    np.testing.assert_allclose(dist, dot, atol=1e-6)


def test_distance_dimension_mismatch():
    with pytest.raises(DimensionError):
        distance_matrix(
            EmbeddingSet.from_arrays(np.ones((1, 2)), [0], [0]),
            EmbeddingSet.from_arrays(np.ones((1, 3)), [0], [0]),
        )


# === AP ===

@pytest.mark.parametrize('relevance, expected', [
    ([1], 1.0),
    ([0, 1], 0.5),
    ([1, 0, 1], (1.0 + 2.0 / 3.0) / 2.0),
])
def test_ap_oracle_values(relevance, expected):
    assert ap_oracle(relevance) == pytest.approx(expected, abs=1e-12)


def test_ap_reference_value():
    assert ap_oracle([1, 0, 1]) == pytest.approx(0.833333, abs=1e-6)
    assert average_precision(np.array([True, False, True])) == ap_oracle([1, 0, 1])


def test_ap_oracle_rejects_bad_lists():
    with pytest.raises(ValueError):
        ap_oracle([0, 0])
    with pytest.raises(ValueError):
        ap_oracle([1, 2])


# === CMC и mAP ===

def test_all_positives_first():
    dist = np.array([[0.1, 0.2, 0.9]])
    report = cmc_map(dist, SampleMeta([1], [0]), SampleMeta([1, 1, 2], [1, 2, 1]))
    assert report.per_query == [1.0]
    assert report.rank(1) == 1.0


def test_same_camera_exclusion_changes_result():
    dist = np.array([[0.1, 0.2, 0.3]])
    q_meta = SampleMeta([1], [0])
    g_meta = SampleMeta([1, 2, 1], [0, 1, 1])
    report = cmc_map(dist, q_meta, g_meta)
    assert report.per_query == [0.5]
    assert report.rank(1) == 0.0
    assert report.rank(2) == 1.0

    without_exclusion = cmc_map(dist, q_meta, SampleMeta([1, 2, 1], [2, 1, 1]))
    assert without_exclusion.rank(1) == 1.0
    assert without_exclusion.per_query[0] == pytest.approx(0.833333, abs=1e-6)


def test_query_with_only_same_camera_positives_is_skipped():
    dist = np.array([[0.1, 0.2], [0.3, 0.1]])
    q_meta = SampleMeta([1, 2], [0, 0])
    g_meta = SampleMeta([1, 2], [0, 1])
    report = cmc_map(dist, q_meta, g_meta)
    assert report.per_query == [None, 1.0]
    assert report.num_skipped == 1
    assert report.mAP == 1.0


def test_no_valid_queries():
    report = cmc_map(np.array([[0.5]]), SampleMeta([1], [0]), SampleMeta([1], [0]))
    assert report.mAP == 0.0
    assert report.rank(1) == 0.0
    assert report.num_valid == 0


def test_equals_brute_force_on_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        dist, q_meta, g_meta = _random_instance(rng)
        report = cmc_map(dist, q_meta, g_meta)
        aps, first_hits = _brute_force(dist, q_meta, g_meta)
        assert report.per_query == aps

        valid = [hit for hit in first_hits if hit is not None]
        for k in range(1, dist.shape[1] + 1):
            expected = sum(1 for hit in valid if hit < k) / len(valid) if valid else 0.0
            assert report.rank(k) == pytest.approx(expected, abs=1e-12)
        assert np.all(np.diff(report.cmc) >= 0)
        assert np.all((report.cmc >= 0) & (report.cmc <= 1))


def test_rank_preserving_shift_keeps_report():
    rng = np.random.default_rng(5)
    dist, q_meta, g_meta = _random_instance(rng, num_query=8, num_gallery=30)
    shifted = dist + rng.integers(0, 100, size=(dist.shape[0], 1))
    first = cmc_map(dist, q_meta, g_meta)
    second = cmc_map(shifted, q_meta, g_meta)
    assert first.per_query == second.per_query
    assert first.mAP == second.mAP


def test_threaded_evaluation_matches_sequential():
    rng = np.random.default_rng(11)
    dist, q_meta, g_meta = _random_instance(rng, num_query=40, num_gallery=50)
    sequential = cmc_map(dist, q_meta, g_meta)
    threaded = cmc_map(dist, q_meta, g_meta, workers=4)
    assert sequential.per_query == threaded.per_query
    assert np.array_equal(sequential.cmc, threaded.cmc)
    assert sequential.mAP == threaded.mAP


def test_misaligned_metadata():
    with pytest.raises(DimensionError):
        cmc_map(np.zeros((2, 3)), SampleMeta([1], [0]), SampleMeta([1, 2, 3], [0, 0, 0]))


def test_self_retrieval_rank1():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(6, 5))
    query = l2_normalize(EmbeddingSet.from_arrays(data, range(6), [0] * 6))
    gallery = l2_normalize(EmbeddingSet.from_arrays(data, range(6), [1] * 6))
    report = cmc_map(distance_matrix(query, gallery), query.meta, gallery.meta)
    assert report.rank(1) == 1.0
    assert report.mAP == 1.0


def test_report_formats(tmp_path):
    report = cmc_map(np.array([[0.1, 0.2], [0.3, 0.1]]), SampleMeta([1, 2], [0, 0]), SampleMeta([1, 2], [0, 1]))
    table = report.format_table()
    assert 'rank1' in table and 'mAP' in table
    assert 'metric=rank1 value=1' in report.format_rows()

    path = tmp_path / 'ap.txt'
    write_ap_file(report, path)
    assert path.read_text(encoding='utf-8').splitlines() == [
        'query=0 ap=NA skipped=1',
        'query=1 ap=1',
    ]
