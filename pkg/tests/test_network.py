# -*- coding: utf-8 -*-
"""Tests for the network configuration, shape tracing and the layer stack"""
import numpy
import pytest

from aiida_csi_positioning.exceptions import ShapeMismatchError
from aiida_csi_positioning.nn import EVAL, TRAIN, Network, NetworkConfig, flatten_length, softmax_nll, trace_shapes


@pytest.fixture
def small_config():
    return NetworkConfig(input_shape=(1, 60, 32), n_classes=12, conv_channels=(8, 16, 16, 32, 32), init_seed=3)


def test_default_shapes():
    shapes = dict(trace_shapes(NetworkConfig()))

    assert shapes['conv1'] == (8, 240, 64)
    assert shapes['pool4'] == (64, 15, 4)
    assert shapes['conv5'] == (64, 15, 4)
    assert flatten_length(NetworkConfig()) == 3840
    assert shapes['linear'] == (30,)


def test_small_network_forward(small_config):
    network = Network(small_config)
    batch = numpy.random.default_rng(0).standard_normal((4, 60, 32))

    logits = network.forward(batch, TRAIN)

    assert flatten_length(small_config) == 32 * 3 * 2
    assert logits.shape == (4, 12)
    assert network.n_parameters == sum(value.size for value in network.parameters().values())
    assert 'linear1.weight' in network.summary()


def test_head_starts_from_the_seeded_he_draw(small_config):
    network = Network(small_config)
    weight = network.parameters()['linear1.weight']

    assert numpy.count_nonzero(weight) == weight.size
    assert numpy.std(weight) == pytest.approx(numpy.sqrt(2.0 / flatten_length(small_config)), rel=0.2)
    assert not numpy.any(network.parameters()['linear1.bias'])
    other = Network(small_config.replace(init_seed=4)).parameters()['linear1.weight']
    assert not numpy.array_equal(weight, other)


def test_first_step_reaches_every_convolution(small_config):
    """The loss gradient of a fresh network is nonzero in every convolution kernel"""
    network = Network(small_config)
    rng = numpy.random.default_rng(1)
    logits = network.forward(rng.standard_normal((6, 60, 32)), TRAIN)
    _, gradient, probs = softmax_nll(logits, [0, 1, 2, 3, 4, 5])
    grads = network.backward(gradient)

    assert not numpy.allclose(probs, 1.0 / 12)
    for index in range(1, 6):
        assert numpy.any(grads[f'conv{index}.weight'] != 0.0), index


def test_initialization_is_seeded(small_config):
    first = Network(small_config).state_dict()
    second = Network(small_config).state_dict()
    other = Network(small_config.replace(init_seed=4)).state_dict()

    assert all(numpy.array_equal(first[name], second[name]) for name in first)
    assert not numpy.array_equal(first['conv1.weight'], other['conv1.weight'])


@pytest.mark.parametrize(
    'changes', [
        {
            'conv_kernels': ((7, 7),) * 5,
            'conv_paddings': (0,) * 5
        },
        {
            'input_shape': (1, 8, 8)
        },
        {
            'pool_windows': ((5, 5),) * 4,
            'input_shape': (1, 12, 12)
        },
    ]
)
def test_shapes_that_do_not_fit(small_config, changes):
    with pytest.raises(ShapeMismatchError):
        Network(small_config.replace(**changes))


@pytest.mark.parametrize('changes', [{'conv_channels': (8, 16)}, {'n_classes': 0}, {'bn_momentum': 0.0}])
def test_invalid_config(small_config, changes):
    with pytest.raises(ValueError):
        small_config.replace(**changes)


def test_config_dict_round_trip(small_config):
    assert NetworkConfig.from_dict(small_config.to_dict()) == small_config


def test_state_dict_round_trip(small_config):
    network = Network(small_config)
    batch = numpy.random.default_rng(2).standard_normal((5, 60, 32))
    network.forward(batch, TRAIN)
    network.parameters()['linear1.weight'][...] = 0.01
    state = network.state_dict()

    other = Network(small_config.replace(init_seed=9))
    other.load_state_dict(state)

    assert numpy.array_equal(network.forward(batch, EVAL), other.forward(batch, EVAL))
    assert numpy.array_equal(other.buffers()['batchnorm1.running_mean'], state['batchnorm1.running_mean'])


def test_state_dict_mismatch(small_config):
    network = Network(small_config)
    state = network.state_dict()
    with pytest.raises(ShapeMismatchError):
        Network(small_config.replace(n_classes=5)).load_state_dict(state)
    del state['linear1.bias']
    with pytest.raises(ShapeMismatchError):
        network.load_state_dict(state)


def test_wrong_input_shape(small_config):
    network = Network(small_config)
    with pytest.raises(ShapeMismatchError):
        network.forward(numpy.zeros((2, 60, 30)))
    with pytest.raises(ValueError):
        network.forward(numpy.zeros((2, 60, 32)), 'predict')


def test_backward_fills_every_gradient(small_config):
    network = Network(small_config)
    logits = network.forward(numpy.random.default_rng(3).standard_normal((4, 60, 32)), TRAIN)
    grads = network.backward(numpy.ones_like(logits) / logits.size)

    assert list(grads) == list(network.parameters())
    for name, grad in grads.items():
        assert grad.shape == network.parameters()[name].shape
