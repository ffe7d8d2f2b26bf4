# -*- coding: utf-8 -*-
"""The pipeline stages behind the command line.

Each stage reads the artifacts of the previous one from the output directory, checks that they were produced by the
same configuration, and writes its own artifacts with a provenance record.
"""
import csv
import json
import os
from typing import Dict, List, Optional

import numpy

from aiida_csi_positioning.channel import build_codebook, calibrate_noise, is_los, read_scene, write_scene
from aiida_csi_positioning.dataset import (
    build_dataset, load_dataset, load_dataset_provenance, sample_snrs, save_dataset
)
from aiida_csi_positioning.exceptions import DataFileError, VerificationError
from aiida_csi_positioning.nn import (
    HISTORY_COLUMNS, Network, Trainer, TrainingHistory, load_checkpoint, make_checkpoint, restore_network,
    save_checkpoint
)
from aiida_csi_positioning.positioning.evaluation import (
    evaluate, format_summary, mean_test_error, sweep_top_r, track_min_mean_error, write_errors_csv, write_sweep_csv
)
from aiida_csi_positioning.utils.log import get_logger
from aiida_csi_positioning.utils.provenance import digest_file, make_provenance

from .config import RunConfig

LOGGER = get_logger('cli.stages')


def _require(path: str, stage: str) -> None:
    if not os.path.isfile(path):
        raise DataFileError(f'{path} does not exist, run the {stage} stage first')


def _remove(*paths: str) -> None:
    for path in paths:
        if os.path.isfile(path):
            os.remove(path)


def check_provenance(provenance: dict, config_hash: str, parent: Optional[str], label: str,
                     seeds: Optional[Dict[str, int]] = None) -> None:
    """Check one link of the provenance chain.

    Args:
        provenance: record stored in the artifact
        config_hash: expected configuration hash of the producing stage
        parent: path of the artifact it must have been derived from, if any
        label: artifact name used in messages
        seeds: expected seed values; only seeds present in the record are compared

    Raises:
        VerificationError: on the first mismatch
    """
    if provenance.get('config_hash') != config_hash:
        raise VerificationError(f'{label} was produced by a different configuration')
    if parent is not None:
        if not os.path.isfile(parent):
            raise VerificationError(f'{label} was derived from {os.path.basename(parent)}, which is missing')
        if provenance.get('parent') != digest_file(parent):
            raise VerificationError(f'{label} was not derived from the current {os.path.basename(parent)}')
    for key, value in (seeds or {}).items():
        if key in provenance and int(provenance[key]) != value:
            raise VerificationError(f'{label} records {key}={provenance[key]}, the configuration has {value}')


def scene_summary(scene) -> str:
    """Point counts and the propagation condition of every point."""
    lines = [
        f'{len(scene.reference_points)} reference points, {len(scene.test_points)} test points, '
        f'{len(scene.buildings)} buildings'
    ]
    n_nlos = 0
    for kind, names, points in (('reference', scene.reference_names, scene.reference_points),
                                ('test', scene.test_names, scene.test_points)):
        for name, point in zip(names, points):
            los = is_los(scene, point)
            if kind == 'test' and not los:
                n_nlos += 1
            lines.append(f'  {kind:9s} {name:8s} ({point[0]:9.3f}, {point[1]:9.3f})  {"LOS" if los else "NLOS"}')
    lines.append(f'{n_nlos} test points in NLOS')
    return '\n'.join(lines) + '\n'


def run_scene(config: RunConfig) -> str:
    """Materialize the scene of the configuration into ``scene.ini``."""
    os.makedirs(config.output_dir, exist_ok=True)
    provenance = make_provenance('scene', config.stage_hash('scene'), seeds={'rng_seed': config.scene.rng_seed})
    write_scene(config.scene, config.artifact('scene'), provenance)
    LOGGER.info(f'wrote {config.artifact("scene")}')
    return scene_summary(config.scene)


def _snr_statistics(tensors: numpy.ndarray, noise_power: float) -> str:
    if len(tensors) == 0:
        return 'no samples'
    snrs = sample_snrs(tensors, noise_power)
    return f'{snrs.min():8.2f} {snrs.mean():8.2f} {snrs.max():8.2f}'


def dataset_summary(dataset, scene) -> str:
    """Class balance and best-beam SNR statistics (min, mean, max in dB) per point."""
    noise_power = float(dataset.provenance['noise_power'])
    train_counts = dataset.train.class_counts(dataset.n_classes)
    validation_counts = dataset.validation.class_counts(dataset.n_classes)
    lines = [
        f'{dataset.n_classes} classes, {len(dataset.train)} train, {len(dataset.validation)} validation and '
        f'{len(dataset.test)} test samples of shape {dataset.n_subcarriers} x {2 * dataset.n_beams}',
        f'noise power {noise_power:.6e}',
        f'  {"point":8s} {"train":>6s} {"val":>6s} {"snr_min":>8s} {"snr_mean":>8s} {"snr_max":>8s}',
    ]
    for class_id, name in enumerate(scene.reference_names):
        tensors = numpy.concatenate([
            dataset.train.tensors[dataset.train.class_ids == class_id],
            dataset.validation.tensors[dataset.validation.class_ids == class_id],
        ])
        lines.append(
            f'  {name:8s} {train_counts[class_id]:6d} {validation_counts[class_id]:6d} '
            f'{_snr_statistics(tensors, noise_power)}'
        )
    for point_id, name in enumerate(scene.test_names):
        tensors = dataset.test.tensors[dataset.test.point_ids == point_id]
        lines.append(f'  {name:8s} {"test":>6s} {len(tensors):6d} {_snr_statistics(tensors, noise_power)}')
    return '\n'.join(lines) + '\n'


def run_dataset(config: RunConfig) -> str:
    """Calibrate the noise, generate, split and save the dataset of the materialized scene."""
    scene_path = config.artifact('scene')
    _require(scene_path, 'scene')
    scene, provenance = read_scene(scene_path)
    check_provenance(provenance, config.stage_hash('scene'), None, 'scene.ini')

    codebook = build_codebook(scene.array, config.n_az_beams, config.n_el_beams)
    budget = calibrate_noise(scene, codebook, config.target_snr_db, config.calibration_distance)
    provenance = make_provenance(
        'dataset',
        config.stage_hash('dataset'),
        parent=digest_file(scene_path),
        seeds={
            'rng_seed': scene.rng_seed,
            'split_seed': config.split_seed
        },
    )
    provenance['noise_power'] = budget.noise_power

    dataset = build_dataset(
        scene,
        codebook,
        budget,
        samples_per_point=config.samples_per_point,
        test_samples_per_point=config.test_samples_per_point,
        train_fraction=config.train_fraction,
        seed=scene.rng_seed,
        split_seed=config.split_seed,
        provenance=provenance,
    )
    save_dataset(dataset, config.artifact('dataset'))
    return dataset_summary(dataset, scene)


def write_metrics_csv(history: TrainingHistory, path: str) -> None:
    """One row per epoch: ``epoch, train_loss, train_acc, val_loss, val_acc``."""
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(HISTORY_COLUMNS)
        for row in history.rows:
            writer.writerow((row[0],) + tuple(repr(float(value)) for value in row[1:]))


def write_test_error_csv(history: TrainingHistory, path: str) -> None:
    """Mean test positioning error after every epoch."""
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(('epoch', 'mean_error_m'))
        for epoch, value in enumerate(history.test_errors, start=1):
            writer.writerow((epoch, repr(float(value))))


def _load_training_inputs(config: RunConfig):
    dataset_path = config.artifact('dataset')
    _require(dataset_path, 'dataset')
    dataset = load_dataset(dataset_path)
    check_provenance(dataset.provenance, config.stage_hash('dataset'), config.artifact('scene'), 'dataset.bin')
    return dataset_path, dataset


def _resume(trainer: Trainer, config: RunConfig, provenance: dict) -> None:
    last_path, best_path = config.artifact('checkpoint_last'), config.artifact('checkpoint_best')
    _require(last_path, 'train')
    last = load_checkpoint(last_path)
    check_provenance(last.provenance, provenance['config_hash'], config.artifact('dataset'), 'checkpoint_last.bin')
    if last.network_config != trainer.network.config or last.train_config != trainer.config:
        raise VerificationError('checkpoint_last.bin was written for a different network or training configuration')

    best_state = None
    if last.best_epoch:
        _require(best_path, 'train')
        best = load_checkpoint(best_path)
        check_provenance(best.provenance, provenance['config_hash'], config.artifact('dataset'), 'checkpoint_best.bin')
        best_state = best.state

    trainer.restore(
        epoch=last.epoch,
        network_state=last.state,
        optimizer=last.optimizer,
        rng_state=last.rng_state,
        history=last.history,
        best_state=best_state,
        best_epoch=last.best_epoch,
        best_val_acc=last.best_val_acc,
    )
    LOGGER.info(f'resuming training after epoch {last.epoch}')


def run_train(config: RunConfig, resume: bool = False, stop_after: Optional[int] = None) -> str:
    """Train on the dataset, writing both checkpoints and the metric files after every epoch.

    Args:
        config: run configuration
        resume: continue from ``checkpoint_last.bin`` instead of starting from scratch
        stop_after: stop once this epoch is done, leaving a resumable state

    Raises:
        TrainingDivergedError: if the loss becomes non-finite; ``divergence.json`` holds the diagnostics
    """
    dataset_path, dataset = _load_training_inputs(config)
    network = Network(config.network_config(dataset.n_subcarriers, 2 * dataset.n_beams, dataset.n_classes))
    LOGGER.debug(f'network layout:\n{network.summary()}')

    callback = None
    if config.track_test_error and len(dataset.test):

        def callback(epoch, trained):  # pylint: disable=unused-argument
            return mean_test_error(trained, dataset.test, dataset.reference_map, config.top_r)

    trainer = Trainer(
        network,
        dataset.train,
        dataset.validation,
        config.train_config,
        epoch_callback=callback,
        dump_path=config.artifact('divergence'),
    )
    provenance = make_provenance(
        'train',
        config.stage_hash('train'),
        parent=digest_file(dataset_path),
        seeds={
            'init_seed': network.config.init_seed,
            'shuffle_seed': config.train_config.shuffle_seed
        },
    )

    if resume:
        _resume(trainer, config, provenance)
    else:
        _remove(
            config.artifact('checkpoint_best'), config.artifact('checkpoint_last'), config.artifact('metrics'),
            config.artifact('test_error'), config.artifact('divergence')
        )
        trainer.baseline()

    until = config.train_config.epochs if stop_after is None else min(stop_after, config.train_config.epochs)
    while trainer.epoch < until:
        trainer.run_epoch()
        save_checkpoint(make_checkpoint(trainer, provenance=provenance), config.artifact('checkpoint_last'))
        if trainer.best_epoch == trainer.epoch:
            save_checkpoint(
                make_checkpoint(trainer, state=trainer.best_state, provenance=provenance),
                config.artifact('checkpoint_best')
            )
        write_metrics_csv(trainer.history, config.artifact('metrics'))
        if trainer.history.test_errors:
            write_test_error_csv(trainer.history, config.artifact('test_error'))

    lines = [f'trained {trainer.epoch} of {config.train_config.epochs} epochs']
    if trainer.best_epoch:
        lines.append(f'maximum validation accuracy {trainer.best_val_acc:.4f} at epoch {trainer.best_epoch}')
    if trainer.history.test_errors:
        index, value = track_min_mean_error(trainer.history.test_errors)
        lines.append(f'minimum mean test error {value:.3f} m at epoch {index + 1}')
    return '\n'.join(lines) + '\n'


def run_eval(config: RunConfig, sweep: Optional[bool] = None) -> str:
    """Evaluate the best checkpoint on the test records and write the error reports.

    Args:
        config: run configuration
        sweep: tabulate the mean error for R = 1..8; defaults to ``[positioning] sweep``
    """
    dataset_path, dataset = _load_training_inputs(config)
    best_path, last_path = config.artifact('checkpoint_best'), config.artifact('checkpoint_last')
    _require(best_path, 'train')
    train_hash = config.stage_hash('train')
    checkpoint = load_checkpoint(best_path)
    check_provenance(checkpoint.provenance, train_hash, dataset_path, 'checkpoint_best.bin')

    # The best checkpoint only knows the history up to its own epoch.
    history = checkpoint.history
    if os.path.isfile(last_path):
        last = load_checkpoint(last_path)
        check_provenance(last.provenance, train_hash, dataset_path, 'checkpoint_last.bin')
        history = last.history

    scene, _ = read_scene(config.artifact('scene'))
    point_los = {point_id: is_los(scene, point) for point_id, point in enumerate(scene.test_points)}
    network = restore_network(checkpoint)
    report = evaluate(network, dataset.test, dataset.reference_map, config.top_r, scene.test_names, point_los)

    min_mean = None
    if history.test_errors:
        index, value = track_min_mean_error(history.test_errors)
        min_mean = (index + 1, value)

    table: List = []
    if (config.sweep if sweep is None else sweep):
        table = sweep_top_r(network, dataset.test, dataset.reference_map)
        write_sweep_csv(table, config.artifact('sweep'))

    write_errors_csv(report, config.artifact('errors'))
    text = format_summary(report, min_mean, checkpoint.best_epoch, table)
    with open(config.artifact('report'), 'w', encoding='utf-8') as handle:
        handle.write(text)

    summary = {
        'top_r': report.top_r,
        'n_test_samples': len(report),
        'overall_mean_error_m': report.overall_mean,
        'per_point': [{
            'test_point_id': int(point),
            'name': report.point_name(point),
            'los': point_los.get(point),
            'mean_error_m': value
        } for point, value in report.per_point_mean().items()],
        'epochs': history.epochs,
        'best_epoch': checkpoint.best_epoch,
        'best_val_acc': checkpoint.best_val_acc,
        'min_mean_error': None if min_mean is None else {
            'epoch': min_mean[0],
            'mean_error_m': min_mean[1]
        },
        'sweep': [{
            'R': top_r,
            'mean_error_m': value
        } for top_r, value in table],
        'provenance':
        make_provenance('eval', config.stage_hash('eval'), parent=digest_file(best_path), seeds=config.seeds),
    }
    with open(config.artifact('summary'), 'w', encoding='utf-8') as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write('\n')
    return text


def run_verify(config: RunConfig) -> str:
    """Recompute the configuration hashes and check the provenance chain of every artifact present.

    Raises:
        VerificationError: on the first broken link, or if there is nothing to verify
    """
    seeds = config.seeds
    scene_path, dataset_path = config.artifact('scene'), config.artifact('dataset')
    if not os.path.isfile(scene_path):
        raise VerificationError(f'nothing to verify: {scene_path} does not exist')

    _, provenance = read_scene(scene_path)
    check_provenance(provenance, config.stage_hash('scene'), None, 'scene.ini', seeds)
    lines = ['scene.ini: ok']

    if os.path.isfile(dataset_path):
        provenance = load_dataset_provenance(dataset_path)
        check_provenance(provenance, config.stage_hash('dataset'), scene_path, 'dataset.bin', seeds)
        lines.append('dataset.bin: ok')

    for name in ('checkpoint_best', 'checkpoint_last'):
        path = config.artifact(name)
        if os.path.isfile(path):
            provenance = load_checkpoint(path).provenance
            check_provenance(provenance, config.stage_hash('train'), dataset_path, os.path.basename(path), seeds)
            lines.append(f'{os.path.basename(path)}: ok')

    summary_path = config.artifact('summary')
    if os.path.isfile(summary_path):
        try:
            with open(summary_path, 'r', encoding='utf-8') as handle:
                provenance = json.load(handle)['provenance']
        except (ValueError, KeyError) as exception:
            raise VerificationError(f'summary.json is unreadable: {exception}')
        check_provenance(
            provenance, config.stage_hash('eval'), config.artifact('checkpoint_best'), 'summary.json', seeds
        )
        lines.append('summary.json: ok')

    LOGGER.info(f'verified {len(lines)} artifacts')
    return '\n'.join(lines) + '\n'


def run_pipeline(config: RunConfig, sweep: Optional[bool] = None, resume: bool = False) -> str:
    """Every stage in order, followed by the verification of the provenance chain.

    With ``resume`` the training continues from the checkpoints already in the output directory; scene and dataset
    are regenerated identically, so the checkpoints stay valid.
    """
    summaries = [run_scene(config), run_dataset(config), run_train(config, resume), run_eval(config, sweep)]
    return ''.join(summaries + [run_verify(config)])


def write_failure(path: str, stage: str, exception: Exception, exit_status: int) -> None:
    """Record a failed stage in ``path`` (normally ``failure.json``) so that wrappers can tell the cause apart."""
    record = {'stage': stage, 'exit_status': exit_status, 'error': type(exception).__name__, 'message': str(exception)}
    for key in ('epoch', 'batch'):
        if hasattr(exception, key):
            record[key] = getattr(exception, key)
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(record, handle, indent=2, sort_keys=True)
        handle.write('\n')
