# -*- coding: utf-8 -*-
"""End-to-end runs of the shipped configurations, enabled with ``--runslow``"""
import json
import os

from click.testing import CliRunner
import pytest

from aiida_csi_positioning.cli import cmd_root


def run_pipeline(config_file, output_dir, *overrides):
    arguments = ['pipeline', config_file, '--set', f'run.output_dir={output_dir}']
    for override in overrides:
        arguments += ['--set', override]
    result = CliRunner().invoke(cmd_root, arguments, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    with open(os.path.join(output_dir, 'summary.json'), encoding='utf-8') as handle:
        return json.load(handle)


@pytest.mark.slow
def test_desk_scale_positioning(config_path, tmp_path):
    """Twelve reference points on a 10 m grid: accurate classification and errors below half the grid spacing"""
    summary = run_pipeline(config_path('desk.ini'), str(tmp_path / 'desk'))

    assert summary['best_val_acc'] >= 0.9
    assert summary['overall_mean_error_m'] < 5.0
    assert summary['n_test_samples'] == 200
    assert sum(1 for entry in summary['per_point'] if entry['los'] is False) >= 2
    assert [entry['R'] for entry in summary['sweep']] == list(range(1, 9))


@pytest.mark.slow
def test_full_scale_configuration_runs(config_path, tmp_path):
    """The full-size network and scene, on a reduced sample count and a single epoch"""
    summary = run_pipeline(
        config_path('full.ini'), str(tmp_path / 'full'), 'dataset.samples_per_point=10',
        'dataset.test_samples_per_point=2', 'training.epochs=1'
    )

    assert summary['epochs'] == 1
    assert summary['n_test_samples'] == 20
    assert len(summary['per_point']) == 10
    assert summary['min_mean_error']['epoch'] == 1
