# -*- coding: utf-8 -*-
"""Versioned binary checkpoint file.

Sectioned container (see :mod:`aiida_csi_positioning.utils.binary`) with magic ``CSIFPCKP``::

    CONF  JSON: network and training configuration, epoch, best epoch and accuracy, shuffle generator state,
          optimizer step and hyperparameters, baseline, provenance
    PARM  count (uint32), then per entry: name length (uint16), UTF-8 name, array as float64
          (parameters followed by batch-norm running statistics)
    OPTM  count (uint32), then per entry: name length (uint16), UTF-8 name, first moment, second moment (float64)
    HIST  history rows (E x 5: epoch, train_loss, train_acc, val_loss, val_acc) then per-epoch test errors, float64
"""
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy

from aiida_csi_positioning.exceptions import DataFileError, ShapeMismatchError
from aiida_csi_positioning.utils.binary import (
    SectionWriter, pack_array, pack_json, read_file, unpack_array, unpack_json
)

from .network import Network, NetworkConfig
from .optim import AdamWState
from .training import TrainConfig, TrainingHistory

CHECKPOINT_MAGIC = b'CSIFPCKP'
CHECKPOINT_VERSION = 1
SUPPORTED_VERSIONS = (1,)

_COUNT = struct.Struct('<I')
_NAME_LENGTH = struct.Struct('<H')


@dataclass
class Checkpoint:
    """Immutable-by-convention snapshot of a network and the training state around it."""

    network_config: NetworkConfig
    train_config: TrainConfig
    state: Dict[str, numpy.ndarray]
    optimizer: AdamWState
    epoch: int
    history: TrainingHistory
    rng_state: dict
    best_epoch: int = 0
    best_val_acc: float = float('-inf')
    provenance: dict = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        """Serialize; equal checkpoints give identical bytes."""
        return checkpoint_to_bytes(self)


def _pack_name(name: str) -> bytes:
    encoded = name.encode('utf-8')
    return _NAME_LENGTH.pack(len(encoded)) + encoded


def _unpack_name(payload: bytes, offset: int) -> Tuple[str, int]:
    (length,) = _NAME_LENGTH.unpack_from(payload, offset)
    offset += _NAME_LENGTH.size
    return payload[offset:offset + length].decode('utf-8'), offset + length


def checkpoint_to_bytes(checkpoint: Checkpoint) -> bytes:
    writer = SectionWriter(CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
    writer.add(
        'CONF',
        pack_json({
            'network': checkpoint.network_config.to_dict(),
            'training': checkpoint.train_config.to_dict(),
            'epoch': checkpoint.epoch,
            'best_epoch': checkpoint.best_epoch,
            'best_val_acc': checkpoint.best_val_acc,
            'rng_state': checkpoint.rng_state,
            'optimizer': dict(checkpoint.optimizer.hyperparameters(), step=checkpoint.optimizer.step),
            'baseline': None if checkpoint.history.baseline is None else list(checkpoint.history.baseline),
            'provenance': checkpoint.provenance,
        })
    )

    chunks = [_COUNT.pack(len(checkpoint.state))]
    for name, value in checkpoint.state.items():
        chunks.append(_pack_name(name))
        chunks.append(pack_array(value, '<f8'))
    writer.add('PARM', b''.join(chunks))

    chunks = [_COUNT.pack(len(checkpoint.optimizer.m))]
    for name, first in checkpoint.optimizer.m.items():
        chunks.append(_pack_name(name))
        chunks.append(pack_array(first, '<f8'))
        chunks.append(pack_array(checkpoint.optimizer.v[name], '<f8'))
    writer.add('OPTM', b''.join(chunks))

    writer.add(
        'HIST',
        pack_array(checkpoint.history.as_array(), '<f8') +
        pack_array(numpy.asarray(checkpoint.history.test_errors, dtype=numpy.float64), '<f8')
    )
    return writer.to_bytes()


def save_checkpoint(checkpoint: Checkpoint, path) -> None:
    with open(path, 'wb') as handle:
        handle.write(checkpoint_to_bytes(checkpoint))


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint file.

    Raises:
        FormatVersionError: wrong magic or unsupported version
        TruncatedFileError: the file ends early
        ChecksumError: a section is corrupted
        DataFileError: sections are missing or malformed
    """
    _, sections = read_file(path, CHECKPOINT_MAGIC, SUPPORTED_VERSIONS)
    missing = [tag for tag in ('CONF', 'PARM', 'OPTM', 'HIST') if tag not in sections]
    if missing:
        raise DataFileError(f'checkpoint file lacks sections {", ".join(missing)}')

    conf = unpack_json(sections['CONF'])
    try:
        network_config = NetworkConfig.from_dict(conf['network'])
        train_config = TrainConfig.from_dict(conf['training'])
        optimizer_conf = dict(conf['optimizer'])
        step = int(optimizer_conf.pop('step'))

        payload = sections['PARM']
        (count,) = _COUNT.unpack_from(payload, 0)
        offset = _COUNT.size
        state = OrderedDict()
        for _ in range(count):
            name, offset = _unpack_name(payload, offset)
            state[name], offset = unpack_array(payload, offset)

        payload = sections['OPTM']
        (count,) = _COUNT.unpack_from(payload, 0)
        offset = _COUNT.size
        optimizer = AdamWState(step=step, **optimizer_conf)
        for _ in range(count):
            name, offset = _unpack_name(payload, offset)
            optimizer.m[name], offset = unpack_array(payload, offset)
            optimizer.v[name], offset = unpack_array(payload, offset)

        rows, offset = unpack_array(sections['HIST'])
        test_errors, _ = unpack_array(sections['HIST'], offset)
    except (KeyError, TypeError, ValueError, struct.error, UnicodeDecodeError) as exception:
        raise DataFileError(f'malformed checkpoint: {exception}')

    return Checkpoint(
        network_config=network_config,
        train_config=train_config,
        state=state,
        optimizer=optimizer,
        epoch=int(conf['epoch']),
        history=TrainingHistory.from_arrays(rows, test_errors, conf.get('baseline')),
        rng_state=conf['rng_state'],
        best_epoch=int(conf['best_epoch']),
        best_val_acc=float(conf['best_val_acc']),
        provenance=conf.get('provenance', {}),
    )


def apply_checkpoint(network: Network, checkpoint: Checkpoint) -> None:
    """Load the checkpoint parameters into ``network``.

    Raises:
        ShapeMismatchError: if the network was built from a different configuration
    """
    if network.config != checkpoint.network_config:
        raise ShapeMismatchError('checkpoint was written for a different network configuration')
    network.load_state_dict(checkpoint.state)


def restore_network(checkpoint: Checkpoint) -> Network:
    """Build the network described by the checkpoint and load its parameters."""
    network = Network(checkpoint.network_config)
    network.load_state_dict(checkpoint.state)
    return network


def make_checkpoint(trainer, state: Optional[dict] = None, provenance: Optional[dict] = None) -> Checkpoint:
    """Snapshot a :class:`~.training.Trainer`; ``state`` replaces the live network parameters (e.g. the best ones)."""
    optimizer = AdamWState(step=trainer.optimizer.step, **trainer.optimizer.hyperparameters())
    for name in trainer.optimizer.m:
        optimizer.m[name] = trainer.optimizer.m[name].copy()
        optimizer.v[name] = trainer.optimizer.v[name].copy()
    history = TrainingHistory(
        rows=list(trainer.history.rows),
        test_errors=list(trainer.history.test_errors),
        baseline=trainer.history.baseline,
    )
    return Checkpoint(
        network_config=trainer.network.config,
        train_config=trainer.config,
        state=trainer.network.state_dict() if state is None else OrderedDict(state),
        optimizer=optimizer,
        epoch=trainer.epoch,
        history=history,
        rng_state=trainer.rng.bit_generator.state,
        best_epoch=trainer.best_epoch,
        best_val_acc=trainer.best_val_acc,
        provenance=dict(provenance or {}),
    )
