# -*- coding: utf-8 -*-
"""
For pytest initialise a test profile and the shared fixtures
"""
import os

import pytest

from aiida_csi_positioning.utils.input_generator import FingerprintInput

pytest_plugins = ['aiida.tools.pytest_fixtures']  # pylint: disable=invalid-name

thisdir = os.path.dirname(os.path.realpath(__file__))  # pylint: disable=invalid-name
configs_dir = os.path.join(thisdir, 'configs')  # pylint: disable=invalid-name


def pytest_addoption(parser):
    """Add cmdline options to pytest"""
    parser.addoption('--runslow', action='store_true', default=False, help='run the desk-scale and full-scale runs')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope='session')
def config_path():
    """Return the path of one of the shipped run configurations"""

    def _config_path(name):
        return os.path.join(configs_dir, name)

    return _config_path


@pytest.fixture
def tiny_sections():
    """Run configuration of a pipeline that trains in seconds: three reference points in a row and one test point"""
    return {
        'run': {
            'output_dir': 'out'
        },
        'scene': {
            'bs_position': '0.0, 0.0, 10.0',
            'n_subcarriers': '16',
            'rng_seed': '3',
        },
        'array': {
            'n_azimuth': '4',
            'n_elevation': '2',
        },
        'buildings': {
            'block': '10.0, 8.0, 16.0, 20.0, 20.0',
        },
        'reference_grid': {
            'origin': '20.0, -5.0',
            'shape': '3, 1',
            'spacing': '10.0',
        },
        'test_points': {
            'middle': '25.0, -5.0',
        },
        'beams': {
            'n_azimuth': '4',
            'n_elevation': '1',
        },
        'dataset': {
            'samples_per_point': '10',
            'test_samples_per_point': '4',
            'split_seed': '1',
        },
        'network': {
            'conv_channels': '2, 2, 2, 2, 2',
            'pool_windows': '2, 2, 1, 1',
            'pool_strides': '2, 2, 1, 1',
            'init_seed': '2',
        },
        'training': {
            'epochs': '3',
            'batch_size': '5',
            'learning_rate': '1e-2',
            'shuffle_seed': '4',
        },
        'positioning': {
            'top_r': '2',
        },
    }


@pytest.fixture
def write_config(tmp_path):
    """Write configuration sections into a file in the temporary directory and return its path"""

    def _write_config(sections, name='run.ini'):
        path = tmp_path / name
        path.write_text(FingerprintInput(sections).render(), encoding='utf-8')
        return str(path)

    return _write_config


@pytest.fixture
def fingerprint_code(aiida_code_installed):
    """Installed code running the csi-positioning executable"""
    return aiida_code_installed(
        label='csi-positioning',
        default_calc_job_plugin='csi_positioning.pipeline',
        filepath_executable='/usr/local/bin/csi-positioning',
    )


@pytest.fixture
def generate_calc_job(tmp_path):
    """Run ``prepare_for_submission`` of a calculation and return the sandbox folder and the calc info"""

    def _generate_calc_job(entry_point_name, inputs):
        from aiida.common.folders import Folder
        from aiida.engine.utils import instantiate_process
        from aiida.manage import get_manager
        from aiida.plugins import CalculationFactory

        runner = get_manager().get_runner()
        process = instantiate_process(runner, CalculationFactory(entry_point_name), **inputs)
        sandbox = tmp_path / 'sandbox'
        sandbox.mkdir(exist_ok=True)
        folder = Folder(str(sandbox))
        calc_info = process.prepare_for_submission(folder)
        return folder, calc_info

    return _generate_calc_job


@pytest.fixture
def generate_calc_job_node(aiida_localhost):
    """Stored calculation node with a ``retrieved`` folder holding the files of a directory"""

    def _generate_calc_job_node(directory=None, exit_status=None):
        from aiida.common import LinkType
        from aiida.orm import CalcJobNode, FolderData

        node = CalcJobNode(computer=aiida_localhost, process_type='aiida.calculations:csi_positioning.pipeline')
        node.set_option('resources', {'num_machines': 1, 'num_mpiprocs_per_machine': 1})
        node.set_option('max_wallclock_seconds', 1800)
        node.set_process_label('FingerprintCalculation')
        node.store()

        if exit_status is not None:
            from plumpy import ProcessState
            node.set_process_state(ProcessState.FINISHED)
            node.set_exit_status(exit_status)

        if directory is not None:
            retrieved = FolderData()
            retrieved.base.repository.put_object_from_tree(str(directory))
            retrieved.base.links.add_incoming(node, link_type=LinkType.CREATE, link_label='retrieved')
            retrieved.store()

        return node

    return _generate_calc_job_node
