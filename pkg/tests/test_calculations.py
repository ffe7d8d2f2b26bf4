# -*- coding: utf-8 -*-
"""Tests for the pipeline calculation"""
import io
import os

from aiida.orm import Dict, SinglefileData
import pytest

from aiida_csi_positioning.cli.config import RunConfig
from aiida_csi_positioning.utils.input_generator import parse_input


@pytest.fixture
def calc_inputs(fingerprint_code, tiny_sections):
    return {
        'code': fingerprint_code,
        'parameters': Dict(tiny_sections),
        'metadata': {
            'options': {
                'resources': {
                    'num_machines': 1,
                    'num_mpiprocs_per_machine': 1
                },
                'max_wallclock_seconds': 1800
            }
        }
    }


def test_prepare_for_submission(generate_calc_job, calc_inputs):
    folder, calc_info = generate_calc_job('csi_positioning.pipeline', calc_inputs)

    assert calc_info.codes_info[0].cmdline_params == ['pipeline', 'aiida.ini']
    assert calc_info.codes_info[0].stdout_name == 'aiida.out'
    assert calc_info.local_copy_list == []
    for name in ('aiida.out', 'summary.json', 'metrics.csv', 'checkpoint_best.bin', 'failure.json'):
        assert name in calc_info.retrieve_list

    assert folder.get_content_list() == ['aiida.ini']
    with folder.open('aiida.ini') as handle:
        content = handle.read()
    assert content.startswith('### Generated by aiida-csi-positioning ###\n# calculation ')

    sections = parse_input(content)
    assert sections['run'] == {'output_dir': '.'}
    assert sections['training']['epochs'] == '3'

    config = RunConfig.from_file(os.path.join(folder.abspath, 'aiida.ini'))
    assert config.output_dir == folder.abspath
    assert len(config.scene.reference_points) == 3


def test_settings(generate_calc_job, calc_inputs):
    calc_inputs['settings'] = Dict({'cmdline': ['--verbosity', 'debug'], 'additional_retrieve_list': ['dataset.bin']})
    _, calc_info = generate_calc_job('csi_positioning.pipeline', calc_inputs)

    assert calc_info.codes_info[0].cmdline_params == ['--verbosity', 'debug', 'pipeline', 'aiida.ini']
    assert 'dataset.bin' in calc_info.retrieve_list


def test_resume_from_checkpoints(generate_calc_job, calc_inputs):
    last = SinglefileData(io.BytesIO(b'last'), filename='previous_last.bin').store()
    best = SinglefileData(io.BytesIO(b'best'), filename='previous_best.bin').store()
    calc_inputs['checkpoints'] = {'last': last, 'best': best}

    _, calc_info = generate_calc_job('csi_positioning.pipeline', calc_inputs)

    assert calc_info.codes_info[0].cmdline_params == ['pipeline', 'aiida.ini', '--resume']
    assert sorted(calc_info.local_copy_list, key=lambda entry: entry[2]) == [
        (best.uuid, 'previous_best.bin', 'checkpoint_best.bin'),
        (last.uuid, 'previous_last.bin', 'checkpoint_last.bin'),
    ]


@pytest.mark.parametrize('parameters', [{'run': {'scene_file': 'scene.ini'}}, {'training': 'fast'}])
def test_invalid_parameters(generate_calc_job, calc_inputs, parameters):
    calc_inputs['parameters'] = Dict(parameters)
    with pytest.raises(ValueError):
        generate_calc_job('csi_positioning.pipeline', calc_inputs)
