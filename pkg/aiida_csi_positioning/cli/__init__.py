# -*- coding: utf-8 -*-
"""Command line interface ``csi-positioning``.

Every subcommand but ``gradcheck`` takes the run configuration file; ``--set section.key=value`` overrides single keys.
"""
import logging
import os
import sys
from typing import Callable, Iterable, Optional

import click
from aiida.cmdline.utils import echo
from aiida.engine import ExitCode

from aiida_csi_positioning.exceptions import (
    DataFileError, NonFiniteError, RunConfigError, SceneGeometryError, ShapeMismatchError, TrainingDivergedError,
    VerificationError
)
from aiida_csi_positioning.nn.gradcheck import DEFAULT_TOLERANCE, run_gradient_checks
from aiida_csi_positioning.utils.log import configure_stream_logging

from . import stages
from .config import ARTIFACTS, RunConfig

EXIT_CONFIG = ExitCode(2, 'invalid run configuration')
EXIT_DATA = ExitCode(3, 'missing, corrupted or inconsistent data file')
EXIT_DIVERGED = ExitCode(4, 'training diverged')
EXIT_VERIFICATION = ExitCode(5, 'verification failed')

VERBOSITY = {
    'debug': logging.DEBUG,
    'info': logging.INFO,
    'warning': logging.WARNING,
    'error': logging.ERROR,
}


def exit_code_for(exception: Exception) -> Optional[ExitCode]:
    """Exit code of a failed stage, ``None`` for exceptions that are bugs rather than run failures."""
    if isinstance(exception, (RunConfigError, SceneGeometryError)):
        return EXIT_CONFIG
    if isinstance(exception, TrainingDivergedError):
        return EXIT_DIVERGED
    if isinstance(exception, VerificationError):
        return EXIT_VERIFICATION
    if isinstance(exception, (DataFileError, ShapeMismatchError, NonFiniteError, OSError)):
        return EXIT_DATA
    return None


def run_stage(stage: str, config_file: str, overrides: Iterable[str], action: Callable[[RunConfig], str]) -> None:
    """Load the configuration, run ``action`` on it and map failures onto exit codes.

    A failure is also recorded in ``failure.json``: in the output directory, or next to the configuration file when
    the configuration itself cannot be read.
    """
    failure_path = os.path.join(os.path.dirname(os.path.abspath(config_file)), ARTIFACTS['failure'])
    try:
        config = RunConfig.from_file(config_file, overrides)
        failure_path = config.artifact('failure')
        if os.path.isfile(failure_path):
            os.remove(failure_path)
        output = action(config)
    except Exception as exception:  # pylint: disable=broad-except
        exit_code = exit_code_for(exception)
        if exit_code is None:
            raise
        echo.echo_error(f'{stage} failed: {exception}')
        if os.path.isdir(os.path.dirname(failure_path)):
            stages.write_failure(failure_path, stage, exception, exit_code.status)
        sys.exit(exit_code.status)
    click.echo(output, nl=False)


CONFIG_FILE = click.argument('config_file', type=click.Path(exists=True, dir_okay=False))
OVERRIDES = click.option(
    '--set',
    'overrides',
    multiple=True,
    metavar='SECTION.KEY=VALUE',
    help='Override a single configuration key; may be repeated.'
)


@click.group('csi-positioning', context_settings={'help_option_names': ['-h', '--help']})
@click.option(
    '-v',
    '--verbosity',
    type=click.Choice(list(VERBOSITY)),
    default='info',
    show_default=True,
    help='Level of the log messages printed to stderr.'
)
def cmd_root(verbosity):
    """Fingerprint positioning from beamformed mmWave CSI: scene, dataset, training, evaluation."""
    configure_stream_logging(VERBOSITY[verbosity])


@cmd_root.command('config')
@CONFIG_FILE
@OVERRIDES
def cmd_config(config_file, overrides):
    """Print the effective configuration with every default."""
    run_stage('config', config_file, overrides, lambda config: config.render())


@cmd_root.command('scene')
@CONFIG_FILE
@OVERRIDES
def cmd_scene(config_file, overrides):
    """Write the scene file and list the LOS condition of every point."""
    run_stage('scene', config_file, overrides, stages.run_scene)


@cmd_root.command('dataset')
@CONFIG_FILE
@OVERRIDES
def cmd_dataset(config_file, overrides):
    """Generate, split and save the CSI dataset."""
    run_stage('dataset', config_file, overrides, stages.run_dataset)


@cmd_root.command('train')
@CONFIG_FILE
@OVERRIDES
@click.option('--resume', is_flag=True, help='Continue from the last checkpoint.')
@click.option('--stop-after', type=click.IntRange(min=1), default=None, help='Stop after this epoch.')
def cmd_train(config_file, overrides, resume, stop_after):
    """Train the classifier, writing checkpoints and per-epoch metrics."""
    run_stage('train', config_file, overrides, lambda config: stages.run_train(config, resume, stop_after))


@cmd_root.command('eval')
@CONFIG_FILE
@OVERRIDES
@click.option('--sweep/--no-sweep', default=None, help='Tabulate the mean error for R = 1..8.')
def cmd_eval(config_file, overrides, sweep):
    """Evaluate the best checkpoint on the test points."""
    run_stage('eval', config_file, overrides, lambda config: stages.run_eval(config, sweep))


@cmd_root.command('verify')
@CONFIG_FILE
@OVERRIDES
def cmd_verify(config_file, overrides):
    """Check the provenance chain of the artifacts against the configuration."""
    run_stage('verify', config_file, overrides, stages.run_verify)


@cmd_root.command('pipeline')
@CONFIG_FILE
@OVERRIDES
@click.option('--sweep/--no-sweep', default=None, help='Tabulate the mean error for R = 1..8.')
@click.option('--resume', is_flag=True, help='Continue the training from the last checkpoint.')
def cmd_pipeline(config_file, overrides, sweep, resume):
    """Run scene, dataset, train and eval, then verify."""
    run_stage('pipeline', config_file, overrides, lambda config: stages.run_pipeline(config, sweep, resume))


@cmd_root.command('gradcheck')
@click.option('--trials', type=click.IntRange(min=1), default=100, show_default=True)
@click.option('--network-trials', type=click.IntRange(min=1), default=5, show_default=True)
@click.option('--seed', type=click.IntRange(min=0), default=0, show_default=True)
def cmd_gradcheck(trials, network_trials, seed):
    """Compare analytic and finite-difference gradients of every layer kind and a small network."""
    worst = run_gradient_checks(trials=trials, network_trials=network_trials, seed=seed)
    for kind, error in worst.items():
        click.echo(f'{kind:16s} {error:.3e}')
    if max(worst.values()) >= DEFAULT_TOLERANCE:
        echo.echo_error(f'relative error above {DEFAULT_TOLERANCE}')
        sys.exit(EXIT_VERIFICATION.status)
