# -*- coding: utf-8 -*-
"""Tests for the ``csi-positioning`` command line interface on a configuration that trains in seconds"""
import json
import os

from click.testing import CliRunner
import pytest

from aiida_csi_positioning.cli import cmd_root
from aiida_csi_positioning.utils.input_generator import parse_input

DETERMINISTIC = (
    'scene.ini', 'dataset.bin', 'checkpoint_best.bin', 'checkpoint_last.bin', 'metrics.csv', 'test_error.csv',
    'errors.csv', 'r_sweep.csv', 'summary.json'
)


@pytest.fixture
def run_cli():
    """Invoke the command line and return the click result"""

    def _run_cli(*arguments):
        return CliRunner().invoke(cmd_root, [str(argument) for argument in arguments], catch_exceptions=False)

    return _run_cli


@pytest.fixture
def config_file(write_config, tiny_sections):
    return write_config(tiny_sections)


def read_failure(directory):
    with open(os.path.join(directory, 'failure.json'), encoding='utf-8') as handle:
        return json.load(handle)


def test_pipeline(run_cli, config_file, tmp_path):
    result = run_cli('pipeline', config_file, '--sweep')
    assert result.exit_code == 0, result.output

    out = tmp_path / 'out'
    for name in DETERMINISTIC + ('report.txt',):
        assert (out / name).is_file(), name
    assert not (out / 'failure.json').exists()

    summary = json.loads((out / 'summary.json').read_text())
    assert summary['top_r'] == 2
    assert summary['n_test_samples'] == 4
    assert summary['epochs'] == 3
    assert [entry['name'] for entry in summary['per_point']] == ['middle']
    assert [entry['test_point_id'] for entry in summary['per_point']] == [0]
    errors = (out / 'errors.csv').read_text().splitlines()
    assert errors[0] == 'test_point_id,sample_idx,error_m'
    assert all(line.startswith('0,') for line in errors[1:])
    assert [entry['R'] for entry in summary['sweep']] == [1, 2, 3]
    assert summary['overall_mean_error_m'] >= 0.0
    assert summary['provenance']['stage'] == 'eval'

    metrics = (out / 'metrics.csv').read_text().splitlines()
    assert metrics[0] == 'epoch,train_loss,train_acc,val_loss,val_acc'
    assert len(metrics) == 4
    assert 'summary.json: ok' in result.output


def test_reruns_are_byte_identical(run_cli, config_file, tmp_path):
    for directory in ('first', 'second'):
        result = run_cli('pipeline', config_file, '--sweep', '--set', f'run.output_dir={directory}')
        assert result.exit_code == 0, result.output

    for name in DETERMINISTIC:
        assert (tmp_path / 'first' / name).read_bytes() == (tmp_path / 'second' / name).read_bytes(), name


def test_stop_and_resume_matches_uninterrupted(run_cli, config_file, tmp_path):
    assert run_cli('pipeline', config_file, '--set', 'run.output_dir=full').exit_code == 0

    split = ('--set', 'run.output_dir=split')
    assert run_cli('scene', config_file, *split).exit_code == 0
    assert run_cli('dataset', config_file, *split).exit_code == 0
    result = run_cli('train', config_file, *split, '--stop-after', 1)
    assert result.exit_code == 0, result.output
    assert 'trained 1 of 3 epochs' in result.output
    assert len((tmp_path / 'split' / 'metrics.csv').read_text().splitlines()) == 2

    result = run_cli('train', config_file, *split, '--resume')
    assert result.exit_code == 0, result.output
    assert run_cli('eval', config_file, *split).exit_code == 0

    for name in ('checkpoint_best.bin', 'checkpoint_last.bin', 'metrics.csv', 'test_error.csv', 'errors.csv'):
        assert (tmp_path / 'split' / name).read_bytes() == (tmp_path / 'full' / name).read_bytes(), name


def test_config_command(run_cli, config_file):
    result = run_cli('--verbosity', 'warning', 'config', config_file, '--set', 'training.epochs=9')
    assert result.exit_code == 0, result.output

    sections = parse_input(result.output)
    assert sections['training']['epochs'] == '9'
    assert sections['training']['weight_decay'] == '0.001'
    assert 'reference_points' in sections
    assert sections['test_points'] == {'middle': '25.0, -5.0'}


def test_invalid_configuration(run_cli, write_config, tiny_sections, tmp_path):
    tiny_sections['training']['momentum'] = '0.9'
    result = run_cli('scene', write_config(tiny_sections))

    assert result.exit_code == 2
    failure = read_failure(tmp_path)
    assert failure['stage'] == 'scene'
    assert failure['exit_status'] == 2
    assert failure['error'] == 'RunConfigError'


def test_scene_inside_a_building(run_cli, write_config, tiny_sections):
    tiny_sections['test_points']['inside'] = '12.0, 10.0'
    assert run_cli('scene', write_config(tiny_sections)).exit_code == 2


def test_corrupted_dataset(run_cli, config_file, tmp_path):
    assert run_cli('scene', config_file).exit_code == 0
    assert run_cli('dataset', config_file).exit_code == 0
    path = tmp_path / 'out' / 'dataset.bin'
    content = bytearray(path.read_bytes())
    content[-6] ^= 0xFF
    path.write_bytes(bytes(content))

    assert run_cli('train', config_file).exit_code == 3
    failure = read_failure(tmp_path / 'out')
    assert failure['stage'] == 'train'
    assert failure['error'] == 'ChecksumError'


def test_missing_upstream_artifact(run_cli, config_file):
    assert run_cli('dataset', config_file).exit_code == 3


def test_divergence(run_cli, config_file, tmp_path):
    result = run_cli('pipeline', config_file, '--set', 'training.learning_rate=1e300')

    assert result.exit_code == 4
    failure = read_failure(tmp_path / 'out')
    assert failure['error'] == 'TrainingDivergedError'
    assert failure['epoch'] == 1
    dump = json.loads((tmp_path / 'out' / 'divergence.json').read_text())
    assert dump['epoch'] == 1


def test_verification(run_cli, config_file, tmp_path):
    assert run_cli('verify', config_file).exit_code == 5

    assert run_cli('pipeline', config_file).exit_code == 0
    result = run_cli('verify', config_file)
    assert result.exit_code == 0
    assert 'checkpoint_best.bin: ok' in result.output

    assert run_cli('verify', config_file, '--set', 'training.epochs=4').exit_code == 5
    assert read_failure(tmp_path / 'out')['error'] == 'VerificationError'

    # a failure record is cleared by the next successful stage
    assert run_cli('verify', config_file).exit_code == 0
    assert not (tmp_path / 'out' / 'failure.json').exists()


def test_resume_requires_the_same_configuration(run_cli, config_file):
    assert run_cli('pipeline', config_file).exit_code == 0
    assert run_cli('train', config_file, '--resume', '--set', 'training.shuffle_seed=8').exit_code == 5


def test_gradcheck_command(run_cli):
    result = run_cli('gradcheck', '--trials', 3, '--network-trials', 1, '--seed', 2)
    assert result.exit_code == 0, result.output
    for kind in ('conv2d', 'batchnorm2d', 'softmax_nll', 'network'):
        assert kind in result.output
