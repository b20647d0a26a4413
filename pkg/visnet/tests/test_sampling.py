"""
Тесты манифеста и PK-батчей
"""

from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from training.sampling import (
    BatchSpec,
    DatasetManifest,
    ManifestRecord,
    PKSampler,
    describe_batches,
    load_manifest,
    parse_market_name,
    pk_batches,
)
from utils.errors import ConfigurationError, ManifestError


def _manifest(images_per_id, split='train') -> DatasetManifest:
    records = []
    for pid, count in enumerate(images_per_id):
        for i in range(count):
            records.append(ManifestRecord(f"{pid:04d}_c1s1_{i:06d}_00.jpg", pid, 1, split))
    return DatasetManifest(records)


def _write(tmp_path, text: str):
    path = tmp_path / 'manifest.csv'
    path.write_text(text, encoding='utf-8')
    return path


# === Манифест ===

def test_load_valid_manifest(tmp_path):
    path = _write(tmp_path, "path,pid,camid,split\na.jpg,1,0,train\nb.jpg,1,1,train\nc.jpg,2,0,query\n")
    manifest = load_manifest(path)
    assert len(manifest) == 3
    assert manifest[2] == ManifestRecord('c.jpg', 2, 0, 'query')
    assert manifest.indices('train') == [0, 1]
    assert manifest.base_dir == tmp_path


def test_duplicate_path_names_line(tmp_path):
    path = _write(tmp_path, "path,pid,camid,split\na.jpg,1,0,train\na.jpg,1,1,train\n")
    with pytest.raises(ManifestError) as info:
        load_manifest(path)
    assert info.value.line == 3
    assert 'строку 2' in str(info.value)


def test_market_names_fill_missing_ids(tmp_path):
    path = _write(
        tmp_path,
        "path,pid,camid,split\n"
        "bbox/0002_c1s1_000451_03.jpg,,,train\n"
        "bbox/-1_c3s2_000000_00.jpg,,,gallery\n"
        "bbox/0007_c5s1_000010_01.jpg,,,query\n",
    )
    manifest = load_manifest(path)
    assert [(r.pid, r.camid) for r in manifest.records] == [(2, 1), (-1, 3), (7, 5)]


@pytest.mark.parametrize('name, expected', [
    ('0002_c1s1_000451_03.jpg', (2, 1)),
    ('/data/1501_c6s3_085592_00.jpg', (1501, 6)),
    ('-1_c2s1_000000_00.jpg', (-1, 2)),
])
def test_parse_market_name(name, expected):
    assert parse_market_name(name) == expected


@pytest.mark.parametrize('text, line', [
    ("path,id,camid,split\n", 1),
    ("path,pid,camid,split\na.jpg,1,0\n", 2),
    ("path,pid,camid,split\na.jpg,x,0,train\n", 2),
    ("path,pid,camid,split\na.jpg,1,0,test\n", 2),
    ("path,pid,camid,split\na.jpg,1,0,train\nb.jpg,-1,0,train\n", 3),
    ("path,pid,camid,split\na.jpg,-2,0,query\n", 2),
    ("path,pid,camid,split\nnoname.jpg,,,train\n", 2),
])
def test_invalid_manifest_reports_line(tmp_path, text, line):
    with pytest.raises(ManifestError) as info:
        load_manifest(_write(tmp_path, text))
    assert info.value.line == line


def test_write_then_load_keeps_records(tmp_path):
    manifest = _manifest([2, 3])
    manifest.write(tmp_path / 'out.csv')
    assert (tmp_path / 'out.csv').read_bytes().startswith(b"path,pid,camid,split\n")
    assert load_manifest(tmp_path / 'out.csv').records == manifest.records


def test_identity_index_skips_junk():
    manifest = DatasetManifest([
        ManifestRecord('a', 1, 0, 'gallery'),
        ManifestRecord('b', -1, 0, 'gallery'),
    ])
    assert manifest.identity_index('gallery') == {1: [0]}


# === PK-батчи ===

def test_reference_batch_size():
    batches = pk_batches(_manifest([20] * 10), num_ids=8, per_id=12, seed=0)
    assert len(batches) == 2
    assert all(len(batch) == 96 for batch in batches)


def test_small_identity_padding_is_balanced():
    manifest = _manifest([5, 20, 20])
    sampler = PKSampler(manifest, num_ids=3, per_id=12, seed=1)
    batch = sampler.epoch(0)[0]
    slots = [i for i, pid in zip(batch.indices, batch.pids) if pid == 0]
    assert len(slots) == 12
    assert max(Counter(slots).values()) <= 3
    assert set(slots) == set(range(5))


def test_large_identity_without_replacement():
    batch = pk_batches(_manifest([30, 30]), num_ids=2, per_id=12, seed=4)[0]
    for pid in (0, 1):
        slots = [i for i, p in zip(batch.indices, batch.pids) if p == pid]
        assert len(set(slots)) == 12


def test_same_seed_same_stream():
    manifest = _manifest([7] * 11)
    first = pk_batches(manifest, num_ids=4, per_id=3, seed=42, epochs=3)
    second = pk_batches(manifest, num_ids=4, per_id=3, seed=42, epochs=3)
    assert first == second
    other = pk_batches(manifest, num_ids=4, per_id=3, seed=43, epochs=3)
    assert first != other


def test_endless_iterator_continues_epochs():
    manifest = _manifest([4] * 5)
    sampler = PKSampler(manifest, num_ids=2, per_id=2, seed=0)
    stream = iter(sampler)
    taken = [next(stream) for _ in range(sampler.batches_per_epoch + 1)]
    assert taken[-1].epoch == 1
    assert taken[:-1] == sampler.epoch(0)


def test_too_few_identities():
    with pytest.raises(ConfigurationError):
        PKSampler(_manifest([5, 5]), num_ids=3, per_id=2)


def test_k_below_two_is_rejected():
    with pytest.raises(ConfigurationError):
        PKSampler(_manifest([5, 5, 5]), num_ids=2, per_id=1)


def test_batch_spec_rejects_unbalanced_batch():
    with pytest.raises(ValueError):
        BatchSpec(indices=(0, 1, 2, 3), pids=(1, 1, 1, 2), num_ids=2, per_id=2)


@settings(max_examples=60, deadline=None)
@given(
    counts=st.lists(st.integers(min_value=1, max_value=9), min_size=2, max_size=12),
    num_ids=st.integers(min_value=2, max_value=5),
    per_id=st.integers(min_value=2, max_value=6),
    seed=st.integers(min_value=0, max_value=2 ** 16),
)
def test_epoch_invariants(counts, num_ids, per_id, seed):
    if len(counts) < num_ids:
        return
    manifest = _manifest(counts)
    batches = pk_batches(manifest, num_ids=num_ids, per_id=per_id, seed=seed)
    seen = set()
    for batch in batches:
        assert len(batch) == num_ids * per_id
        assert len(set(batch.pids)) == num_ids
        for index, pid in zip(batch.indices, batch.pids):
            assert manifest[index].pid == pid
        seen.update(batch.pids)
    assert seen == set(range(len(counts)))


def test_describe_batches_lines():
    batches = pk_batches(_manifest([2, 2]), num_ids=2, per_id=2, seed=0)
    lines = describe_batches(batches)
    assert len(lines) == 1
    assert lines[0].startswith("epoch=0 batch=0 size=4 pids=0,1 indices=")
