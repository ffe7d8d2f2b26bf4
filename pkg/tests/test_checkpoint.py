# -*- coding: utf-8 -*-
"""Tests for the checkpoint file"""
import numpy
import pytest

from aiida_csi_positioning.dataset import SampleSet
from aiida_csi_positioning.exceptions import ChecksumError, FormatVersionError, ShapeMismatchError, TruncatedFileError
from aiida_csi_positioning.nn import (
    EVAL, Network, NetworkConfig, TrainConfig, Trainer, apply_checkpoint, load_checkpoint, make_checkpoint,
    restore_network, save_checkpoint
)

CONFIG = NetworkConfig(
    input_shape=(1, 8, 8),
    n_classes=2,
    conv_channels=(2, 2, 2, 2, 2),
    pool_windows=((2, 2), (1, 1), (1, 1), (1, 1)),
    pool_strides=((2, 2), (1, 1), (1, 1), (1, 1)),
    init_seed=5,
)


@pytest.fixture
def trainer():
    rng = numpy.random.default_rng(0)
    train = SampleSet(rng.standard_normal((10, 8, 8)), [0, 1] * 5)
    validation = SampleSet(rng.standard_normal((4, 8, 8)), [0, 1, 0, 1])
    trainer = Trainer(Network(CONFIG), train, validation, TrainConfig(epochs=2, batch_size=4, learning_rate=1e-3))
    trainer.run()
    return trainer


@pytest.fixture
def checkpoint_file(tmp_path, trainer):
    path = tmp_path / 'checkpoint_last.bin'
    save_checkpoint(make_checkpoint(trainer, provenance={'stage': 'train', 'config_hash': 'h'}), path)
    return path


def test_round_trip_is_bit_exact(tmp_path, trainer, checkpoint_file):
    checkpoint = load_checkpoint(checkpoint_file)

    assert checkpoint.epoch == 2
    assert checkpoint.network_config == CONFIG
    assert checkpoint.train_config == trainer.config
    assert checkpoint.provenance == {'stage': 'train', 'config_hash': 'h'}
    assert checkpoint.optimizer.step == trainer.optimizer.step
    assert checkpoint.history.rows == trainer.history.rows
    for name, value in trainer.network.state_dict().items():
        assert numpy.array_equal(checkpoint.state[name], value)
    for name, value in trainer.optimizer.v.items():
        assert numpy.array_equal(checkpoint.optimizer.v[name], value)

    copy = tmp_path / 'copy.bin'
    save_checkpoint(checkpoint, copy)
    assert copy.read_bytes() == checkpoint_file.read_bytes()


def test_restored_network_predicts_identically(trainer, checkpoint_file):
    batch = numpy.random.default_rng(1).standard_normal((3, 8, 8))
    network = restore_network(load_checkpoint(checkpoint_file))
    assert numpy.array_equal(network.forward(batch, EVAL), trainer.network.forward(batch, EVAL))


def test_apply_to_a_different_network(checkpoint_file):
    with pytest.raises(ShapeMismatchError):
        apply_checkpoint(Network(CONFIG.replace(n_classes=3)), load_checkpoint(checkpoint_file))

    network = Network(CONFIG.replace(init_seed=8))
    with pytest.raises(ShapeMismatchError):
        apply_checkpoint(network, load_checkpoint(checkpoint_file))
    apply_checkpoint(Network(CONFIG), load_checkpoint(checkpoint_file))


def test_corrupted_checkpoints(tmp_path, checkpoint_file):
    content = checkpoint_file.read_bytes()

    flipped = bytearray(content)
    flipped[-6] ^= 0x01
    (tmp_path / 'flipped.bin').write_bytes(bytes(flipped))
    with pytest.raises(ChecksumError):
        load_checkpoint(tmp_path / 'flipped.bin')

    (tmp_path / 'short.bin').write_bytes(content[:-3])
    with pytest.raises(TruncatedFileError):
        load_checkpoint(tmp_path / 'short.bin')

    (tmp_path / 'dataset.bin').write_bytes(b'CSIFPDAT' + content[8:])
    with pytest.raises(FormatVersionError):
        load_checkpoint(tmp_path / 'dataset.bin')
