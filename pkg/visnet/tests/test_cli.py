"""
Тесты командной строки
"""

import json

import numpy as np
from PIL import Image
import pytest

from main import build_parser, main
from utils.embedding_io import write_embeddings
from utils.errors import EXIT_CHECK_FAILED, EXIT_INPUT_ERROR, EXIT_NUMERICAL_ERROR, EXIT_OK
from utils.image_io import load_image, save_image


@pytest.fixture
def retrieval_files(tmp_path):
    manifest = tmp_path / 'manifest.csv'
    manifest.write_text(
        "path,pid,camid,split\n"
        "q1.jpg,1,0,query\n"
        "q2.jpg,2,0,query\n"
        "g1.jpg,1,1,gallery\n"
        "g2.jpg,2,1,gallery\n"
        "g3.jpg,3,1,gallery\n",
        encoding='utf-8',
    )
    query = tmp_path / 'query.vneb'
    gallery = tmp_path / 'gallery.vneb'
    write_embeddings(query, np.array([[1.0, 0.0], [0.0, 1.0]]))
    write_embeddings(gallery, np.array([[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]]))
    return tmp_path, query, gallery, manifest


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_param_count_rows(capsys):
    assert main(['param-count', '--assert-table3']) == EXIT_OK
    out = capsys.readouterr().out
    assert 'component=backbone parameters=23508032' in out
    assert 'component=fusion parameters=8940036' in out
    assert 'status=DISCREPANCY' in out


def test_param_count_assertion_fails_on_derivable_row(tmp_path, capsys):
    spec = tmp_path / 'arch.json'
    spec.write_text(json.dumps({
        'components': [{'name': 'backbone', 'reference': 10, 'layers': [{'kind': 'bn', 'in': 4}]}],
    }), encoding='utf-8')
    assert main(['param-count', '--spec', str(spec)]) == EXIT_OK
    assert main(['param-count', '--spec', str(spec), '--assert-table3']) == EXIT_CHECK_FAILED


def test_param_count_dump_spec(tmp_path, capsys):
    target = tmp_path / 'dumped.json'
    assert main(['param-count', '--dump-spec', str(target)]) == EXIT_OK
    assert json.loads(target.read_text(encoding='utf-8'))['reference_total'] == 32_411_720


def test_grad_check_passes_and_detects_corruption(capsys):
    assert main(['grad-check']) == EXIT_OK
    assert 'max_rel_err=' in capsys.readouterr().out
    assert main(['grad-check', '--corrupt-gradient']) == EXIT_NUMERICAL_ERROR


def test_eval_writes_metrics_and_ap_file(retrieval_files, capsys):
    tmp_path, query, gallery, manifest = retrieval_files
    code = main(['eval', '--query', str(query), '--gallery', str(gallery), '--manifest', str(manifest)])
    assert code == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert 'metric=rank1 value=1' in out
    assert 'metric=mAP value=1' in out
    ap_lines = (tmp_path / 'per_query_ap.txt').read_text(encoding='utf-8').splitlines()
    assert ap_lines == ['query=0 ap=1', 'query=1 ap=1']


def test_eval_count_mismatch(retrieval_files, tmp_path):
    _, query, _, manifest = retrieval_files
    short = tmp_path / 'short.vneb'
    write_embeddings(short, np.eye(2))
    assert main(['eval', '--query', str(query), '--gallery', str(short), '--manifest', str(manifest)]) \
        == EXIT_INPUT_ERROR


def test_eval_dimension_mismatch(retrieval_files, tmp_path):
    _, query, _, manifest = retrieval_files
    wide = tmp_path / 'wide.vneb'
    write_embeddings(wide, np.eye(3))
    assert main(['eval', '--query', str(query), '--gallery', str(wide), '--manifest', str(manifest)]) \
        == EXIT_INPUT_ERROR


def test_eval_requires_paths():
    assert main(['eval']) == EXIT_INPUT_ERROR


def test_augment_directory(tmp_path):
    source = tmp_path / 'in'
    rng = np.random.default_rng(0)
    save_image(rng.integers(0, 256, size=(16, 8, 3), dtype=np.uint8), source / 'p.png')
    mask = np.zeros((16, 8, 3), dtype=np.uint8)
    mask[4:12, 2:6] = 255
    save_image(mask, source / 'p_mask.png')

    out = tmp_path / 'out'
    args = ['augment', '--input-dir', str(source), '--output-dir', str(out), '--copies', '2',
            '--probability', '1', '--strength', '1']
    assert main(args) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ['p_aug0.png', 'p_aug1.png']

    first = (out / 'p_aug0.png').read_bytes()
    assert main(args) == EXIT_OK
    assert (out / 'p_aug0.png').read_bytes() == first


def test_augment_rejects_bad_strength(tmp_path):
    assert main(['augment', '--input-dir', str(tmp_path), '--output-dir', str(tmp_path / 'o'),
                 '--strength', '2']) == EXIT_INPUT_ERROR


def test_sample_synthetic(capsys):
    assert main(['sample', '-P', '4', '-K', '3', '--seed', '7']) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines
    assert main(['sample', '-P', '4', '-K', '3', '--seed', '7']) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == lines


def test_sample_with_missing_manifest(tmp_path):
    assert main(['sample', '--manifest', str(tmp_path / 'absent.csv')]) == EXIT_INPUT_ERROR


def test_config_file_errors(tmp_path):
    config = tmp_path / 'config.json'
    config.write_text('{"sample": {"bogus": 1}}', encoding='utf-8')
    assert main(['--config', str(config), 'sample']) == EXIT_INPUT_ERROR


def test_config_file_sets_defaults(tmp_path, capsys):
    config = tmp_path / 'config.json'
    config.write_text('{"sample": {"num_ids_per_batch": 4, "per_id_in_batch": 2, "seed": 3}}', encoding='utf-8')
    assert main(['--config', str(config), 'sample']) == EXIT_OK
    from_file = capsys.readouterr().out
    assert main(['sample', '-P', '4', '-K', '2', '--seed', '3']) == EXIT_OK
    assert capsys.readouterr().out == from_file


@pytest.mark.parametrize('command,section,values,field', [
    ('train-demo', 'train_demo', {'steps': '10'}, 'train_demo.steps'),
    ('grad-check', 'grad_check', {'stage4_size': 2}, 'grad_check.stage4_size'),
    ('augment', 'augment', {'params': {'probability': 0.5}}, 'augment.probability'),
    ('transform', 'transform', {'params': {'hue': 'wide'}}, 'transform.hue'),
])
def test_wrongly_typed_config_is_input_error(tmp_path, caplog, command, section, values, field):
    if section in ('augment', 'transform'):
        values = {**values, 'input_dir': str(tmp_path), 'output_dir': str(tmp_path / 'out')}
    config = tmp_path / 'config.json'
    config.write_text(json.dumps({section: values}), encoding='utf-8')

    assert main(['--config', str(config), command]) == EXIT_INPUT_ERROR
    assert field in caplog.text


def _source_image(tmp_path):
    source = tmp_path / 'in'
    image = np.random.default_rng(2).integers(0, 256, size=(40, 20, 3), dtype=np.uint8)
    save_image(image, source / 'p.png')
    save_image(np.full((40, 20, 3), 255, dtype=np.uint8), source / 'p_mask.png')
    return source, image


def test_transform_train_copies(tmp_path, capsys):
    source, _ = _source_image(tmp_path)
    out = tmp_path / 'out'
    args = ['transform', '--input-dir', str(source), '--output-dir', str(out), '--copies', '2', '--seed', '1']

    assert main(args) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert [line.split()[:2] for line in lines] == [['image=p.png', 'copy=0'], ['image=p.png', 'copy=1']]
    assert sorted(p.name for p in out.iterdir()) == ['p_train0.png', 'p_train1.png']
    assert load_image(out / 'p_train0.png').shape == (256, 128, 3)

    first = (out / 'p_train1.png').read_bytes()
    assert main(args) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == lines
    assert (out / 'p_train1.png').read_bytes() == first


def test_transform_eval_is_resize_only(tmp_path, capsys):
    source, image = _source_image(tmp_path)
    out = tmp_path / 'out'

    assert main(['transform', '--input-dir', str(source), '--output-dir', str(out), '--mode', 'eval']) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == ['image=p.png shape=3x256x128']
    expected = np.asarray(Image.fromarray(image).resize((128, 256), Image.Resampling.BILINEAR))
    assert np.array_equal(load_image(out / 'p_eval.png'), expected)


def test_transform_rejects_zero_std_from_config(tmp_path):
    source, _ = _source_image(tmp_path)
    config = tmp_path / 'config.json'
    config.write_text(json.dumps({'transform': {'mode': 'eval', 'std': [0.2, 0.0, 0.2]}}), encoding='utf-8')
    args = ['--config', str(config), 'transform', '--input-dir', str(source), '--output-dir', str(tmp_path / 'o')]
    assert main(args) == EXIT_INPUT_ERROR
