"""
Тесты подсчета параметров и описания архитектуры
"""

import pytest

from config.architecture import (
    REFERENCE_TOTAL,
    ArchSpec,
    ComponentSpec,
    LayerSpec,
    default_arch_spec,
    load_arch_spec,
    parse_arch_spec,
)
from model.param_count import count_layer, count_parameters
from utils.errors import EXIT_INPUT_ERROR, ArchSpecError


@pytest.fixture(scope='module')
def table():
    return count_parameters(default_arch_spec())


@pytest.mark.parametrize('component,expected', [
    ('backbone', 23_508_032),
    ('semantic_head', 2_628_100),
    ('classifier', 1_538_048),
    ('bn_neck', 4_096),
])
def test_derivable_rows_match_reference(table, component, expected):
    assert table.as_dict()[component] == expected


def test_derivable_rows_have_no_mismatches(table):
    assert table.mismatches() == []


def test_fusion_row_is_flagged(table):
    fusion = next(row for row in table.rows if row.name == 'fusion')
    assert fusion.reference == 4_733_444
    assert fusion.count == 8_940_036
    assert fusion.status == 'DISCREPANCY'
    assert table.reference_total == REFERENCE_TOTAL


def test_percentages_sum_to_hundred(table):
    assert sum(row.percent for row in table.rows) == pytest.approx(100.0)


def test_rows_format(table):
    rows = table.format_rows()
    assert rows[0].startswith('component=backbone parameters=23508032 percent=')
    assert rows[0].endswith('reference=23508032 status=OK')
    assert rows[-1] == f"component=total parameters={table.total}"
    assert 'DISCREPANCY' in table.format_table()


@pytest.mark.parametrize('layer,expected', [
    (LayerSpec('conv', 3, 64, kernel=7), 9_408),
    (LayerSpec('conv', 256, 2048, bias=True), 526_336),
    (LayerSpec('bn', 64, 64), 128),
    (LayerSpec('linear', 512, 4, bias=True), 2_052),
    (LayerSpec('linear', 2048, 751), 1_538_048),
])
def test_count_layer(layer, expected):
    assert count_layer(layer) == expected


def test_unknown_layer_kind():
    with pytest.raises(ArchSpecError):
        count_layer(LayerSpec('pool', 4, 4))


def test_component_without_reference_has_empty_status():
    spec = ArchSpec(components=[ComponentSpec('extra', [LayerSpec('bn', 8, 8)])])
    row = count_parameters(spec).rows[0]
    assert row.count == 16
    assert row.status == ''
    assert row.percent == 100.0


def test_dump_then_load_keeps_counts(tmp_path, table):
    path = tmp_path / 'arch.json'
    default_arch_spec().dump(path)
    assert count_parameters(load_arch_spec(path)).as_dict() == table.as_dict()


def test_unknown_kind_reports_line():
    text = (
        '{\n'
        '  "components": [\n'
        '    {\n'
        '      "name": "head",\n'
        '      "layers": [{"kind": "pool", "in": 4}]\n'
        '    }\n'
        '  ]\n'
        '}\n'
    )
    with pytest.raises(ArchSpecError) as excinfo:
        parse_arch_spec(text)
    assert excinfo.value.line == 4
    assert str(excinfo.value).startswith('строка 4: ')
    assert excinfo.value.exit_code == EXIT_INPUT_ERROR


@pytest.mark.parametrize('text', [
    '{"components": [',
    '[]',
    '{"components": [{"layers": []}]}',
    '{"components": [{"name": "x", "layers": [{"kind": "conv", "in": 0}]}]}',
    '{"components": [{"name": "x", "layers": [{"kind": "bn", "in": true}]}]}',
])
def test_invalid_specs(text):
    with pytest.raises(ArchSpecError):
        parse_arch_spec(text)


def test_component_without_name_reports_its_line():
    text = (
        '{\n'
        '  "components": [\n'
        '    {"name": "head", "layers": []},\n'
        '    {\n'
        '      "layers": [{"kind": "bn", "in": 4}]\n'
        '    }\n'
        '  ]\n'
        '}\n'
    )
    with pytest.raises(ArchSpecError) as excinfo:
        parse_arch_spec(text)
    assert excinfo.value.line == 4
    assert str(excinfo.value).startswith('строка 4: ')


@pytest.mark.parametrize('bias', ['"false"', '1', 'null'])
def test_bias_must_be_boolean(bias):
    text = (
        '{\n'
        '  "components": [\n'
        '    {\n'
        '      "name": "proj",\n'
        f'      "layers": [{{"kind": "conv", "in": 4, "out": 2, "bias": {bias}}}]\n'
        '    }\n'
        '  ]\n'
        '}\n'
    )
    with pytest.raises(ArchSpecError) as excinfo:
        parse_arch_spec(text)
    assert excinfo.value.line == 4
    assert 'bias' in str(excinfo.value)


def test_boolean_bias_is_counted():
    text = '{"components": [{"name": "proj", "layers": [{"kind": "conv", "in": 4, "out": 2, "bias": true}]}]}'
    spec = parse_arch_spec(text)
    assert spec.components[0].layers[0].bias is True


def test_missing_spec_file(tmp_path):
    with pytest.raises(ArchSpecError):
        load_arch_spec(tmp_path / 'absent.json')
