# -*- coding: utf-8 -*-
"""Tests for the base restart work chain"""
from aiida.orm import Dict
from aiida.plugins import WorkflowFactory
import pytest

from aiida_csi_positioning.workchains import reduce_learning_rate

FingerprintBaseWorkChain = WorkflowFactory('csi_positioning.base')  # pylint: disable=invalid-name


def test_reduce_learning_rate():
    parameters = {'training': {'learning_rate': '1e-2', 'epochs': '3'}, 'dataset': {'split_seed': '1'}}
    reduced = reduce_learning_rate(parameters)

    assert reduced['training'] == {'learning_rate': pytest.approx(1e-3), 'epochs': '3'}
    assert reduced['dataset'] == parameters['dataset']
    assert parameters['training']['learning_rate'] == '1e-2'
    assert reduce_learning_rate({}, 2.0)['training']['learning_rate'] == pytest.approx(5e-7)
    with pytest.raises(ValueError):
        reduce_learning_rate(parameters, 1.0)


def test_exit_codes():
    assert FingerprintBaseWorkChain.exit_codes.ERROR_LEARNING_RATE_EXHAUSTED.status == 320


@pytest.fixture
def generate_workchain(fingerprint_code, tiny_sections):
    """Instantiate the work chain with the tiny run configuration and run its setup step"""

    def _generate_workchain(**training):
        from aiida.engine.utils import instantiate_process
        from aiida.manage import get_manager

        sections = dict(tiny_sections, training=dict(tiny_sections['training'], **training))
        inputs = {
            'fingerprint': {
                'code': fingerprint_code,
                'parameters': Dict(sections),
                'metadata': {
                    'options': {
                        'resources': {
                            'num_machines': 1
                        },
                        'max_wallclock_seconds': 1800
                    }
                },
            }
        }
        process = instantiate_process(get_manager().get_runner(), FingerprintBaseWorkChain, **inputs)
        process.setup()
        return process

    return _generate_workchain


def test_diverged_training_restarts_with_a_smaller_learning_rate(generate_workchain, generate_calc_job_node):
    process = generate_workchain()
    node = generate_calc_job_node(exit_status=312)

    result = process.handle_training_diverged(node)

    assert result.do_break
    assert result.exit_code.status == 0
    assert process.ctx.inputs.parameters['training']['learning_rate'] == pytest.approx(1e-3)


def test_learning_rate_exhausted(generate_workchain, generate_calc_job_node):
    process = generate_workchain(learning_rate='1e-12')
    node = generate_calc_job_node(exit_status=312)

    result = process.handle_training_diverged(node)

    assert result.exit_code == FingerprintBaseWorkChain.exit_codes.ERROR_LEARNING_RATE_EXHAUSTED
