# -*- coding: utf-8 -*-
"""Network configuration, shape tracing and the layer stack of the fingerprint classifier.

Layer order::

    BatchNorm2D -> [Conv2D -> ReLU -> MaxPool2D] x 4 -> Conv2D -> ReLU -> Flatten -> BatchNorm1D -> Linear
"""
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Dict, List, Tuple

import numpy

from aiida_csi_positioning.exceptions import ShapeMismatchError
from aiida_csi_positioning.utils.log import get_logger

from . import functional as F
from .layers import BatchNorm, Conv2D, Flatten, Layer, Linear, MaxPool2D, ReLU

LOGGER = get_logger('nn.network')

N_CONV_STAGES = 5
N_POOL_STAGES = 4


def _pairs(values) -> Tuple[Tuple[int, int], ...]:
    return tuple((int(value[0]), int(value[1])) for value in values)


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture of the classifier; the pools follow the first four convolutions only."""

    input_shape: Tuple[int, int, int] = (1, 240, 64)
    n_classes: int = 30
    conv_channels: Tuple[int, ...] = (8, 16, 32, 64, 64)
    conv_kernels: Tuple[Tuple[int, int], ...] = ((3, 3),) * N_CONV_STAGES
    conv_strides: Tuple[int, ...] = (1,) * N_CONV_STAGES
    conv_paddings: Tuple[int, ...] = (1,) * N_CONV_STAGES
    pool_windows: Tuple[Tuple[int, int], ...] = ((2, 2),) * N_POOL_STAGES
    pool_strides: Tuple[Tuple[int, int], ...] = ((2, 2),) * N_POOL_STAGES
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1
    init_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'input_shape', tuple(int(value) for value in self.input_shape))
        object.__setattr__(self, 'conv_channels', tuple(int(value) for value in self.conv_channels))
        object.__setattr__(self, 'conv_kernels', _pairs(self.conv_kernels))
        object.__setattr__(self, 'conv_strides', tuple(int(value) for value in self.conv_strides))
        object.__setattr__(self, 'conv_paddings', tuple(int(value) for value in self.conv_paddings))
        object.__setattr__(self, 'pool_windows', _pairs(self.pool_windows))
        object.__setattr__(self, 'pool_strides', _pairs(self.pool_strides))

        conv_lengths = {
            len(self.conv_channels),
            len(self.conv_kernels),
            len(self.conv_strides),
            len(self.conv_paddings)
        }
        if conv_lengths != {N_CONV_STAGES}:
            raise ValueError(f'exactly {N_CONV_STAGES} convolution stages are required')
        if {len(self.pool_windows), len(self.pool_strides)} != {N_POOL_STAGES}:
            raise ValueError(f'exactly {N_POOL_STAGES} pooling stages are required')
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ValueError(f'input shape must be three positive dimensions, got {self.input_shape}')
        if self.n_classes < 1:
            raise ValueError(f'need at least one class, got {self.n_classes}')
        if min(self.conv_channels) < 1 or min(self.conv_strides) < 1 or min(self.conv_paddings) < 0:
            raise ValueError('convolution channels and strides must be positive, paddings non-negative')
        if not (self.bn_eps > 0 and 0 < self.bn_momentum <= 1):
            raise ValueError('batch normalization needs eps > 0 and momentum in (0, 1]')

    def to_dict(self) -> dict:
        """JSON-compatible representation."""
        content = asdict(self)
        for key, value in content.items():
            if isinstance(value, tuple):
                content[key] = [list(item) if isinstance(item, tuple) else item for item in value]
        return content

    @classmethod
    def from_dict(cls, content: dict) -> 'NetworkConfig':
        return cls(**content)

    def replace(self, **changes) -> 'NetworkConfig':
        return type(self)(**{**asdict(self), **changes})


def trace_shapes(config: NetworkConfig) -> List[Tuple[str, Tuple[int, ...]]]:
    """Per-sample output shape after every stage, for the configured input.

    Raises:
        ShapeMismatchError: if a kernel or pooling window no longer fits, or the flattened length is zero
    """
    channels, height, width = config.input_shape
    shapes = [('input', (channels, height, width))]
    for stage in range(N_CONV_STAGES):
        k_h, k_w = config.conv_kernels[stage]
        stride, padding = config.conv_strides[stage], config.conv_paddings[stage]
        height = F.output_size(height, k_h, stride, padding)
        width = F.output_size(width, k_w, stride, padding)
        channels = config.conv_channels[stage]
        if height < 1 or width < 1:
            raise ShapeMismatchError(f'convolution stage {stage + 1} kernel {k_h}x{k_w} does not fit its input')
        shapes.append((f'conv{stage + 1}', (channels, height, width)))
        if stage < N_POOL_STAGES:
            (w_h, w_w), (s_h, s_w) = config.pool_windows[stage], config.pool_strides[stage]
            if w_h > height or w_w > width:
                raise ShapeMismatchError(
                    f'pooling stage {stage + 1} window {w_h}x{w_w} larger than its input {height}x{width}'
                )
            height = F.output_size(height, w_h, s_h)
            width = F.output_size(width, w_w, s_w)
            shapes.append((f'pool{stage + 1}', (channels, height, width)))
    shapes.append(('flatten', (channels * height * width,)))
    shapes.append(('linear', (config.n_classes,)))
    return shapes


def flatten_length(config: NetworkConfig) -> int:
    """Number of features entering the classifier head."""
    return trace_shapes(config)[-2][1][0]


class Network:
    """The classifier: owns its layers, parameters, gradients and batch-norm statistics.

    Shapes are traced at construction so that a bad configuration fails here rather than mid-training. Convolution and
    classifier head weights start from one seeded He initialization, drawn in layer order; biases start at zero.
    """

    def __init__(self, config: NetworkConfig) -> None:
        self.config = config
        self.shapes = trace_shapes(config)
        self.layers: List[Layer] = self._build_layers(config)
        self._names = self._name_layers()
        self.initialize()

    def _build_layers(self, config: NetworkConfig) -> List[Layer]:
        layers: List[Layer] = [BatchNorm(config.input_shape[0], config.bn_momentum, config.bn_eps)]
        in_channels = config.input_shape[0]
        for stage in range(N_CONV_STAGES):
            layers.append(
                Conv2D(
                    in_channels, config.conv_channels[stage], config.conv_kernels[stage], config.conv_strides[stage],
                    config.conv_paddings[stage]
                )
            )
            layers.append(ReLU())
            if stage < N_POOL_STAGES:
                layers.append(MaxPool2D(config.pool_windows[stage], config.pool_strides[stage]))
            in_channels = config.conv_channels[stage]
        features = flatten_length(config)
        layers.append(Flatten())
        layers.append(BatchNorm(features, config.bn_momentum, config.bn_eps))
        layers.append(Linear(features, config.n_classes))
        return layers

    def _name_layers(self) -> List[str]:
        names, counters = [], {}
        for layer in self.layers:
            counters[layer.kind] = counters.get(layer.kind, 0) + 1
            names.append(f'{layer.kind}{counters[layer.kind]}')
        return names

    def initialize(self) -> None:
        """Reset every parameter and statistic from ``config.init_seed``."""
        rng = numpy.random.default_rng(self.config.init_seed)
        for layer in self.layers:
            if isinstance(layer, (Conv2D, Linear)):
                layer.initialize(rng)
            elif isinstance(layer, BatchNorm):
                layer.params['gamma'][...] = 1.0
                layer.params['beta'][...] = 0.0
                layer.buffers['running_mean'][...] = 0.0
                layer.buffers['running_var'][...] = 1.0
            layer.zero_grad()

    def _check_batch(self, batch: numpy.ndarray) -> numpy.ndarray:
        batch = numpy.asarray(batch, dtype=numpy.float64)
        if batch.ndim == 3:
            batch = batch[:, None, :, :]
        if batch.ndim != 4 or batch.shape[1:] != self.config.input_shape:
            raise ShapeMismatchError(
                f'input batch {batch.shape} does not match the network input {self.config.input_shape}'
            )
        return batch

    def forward(self, batch: numpy.ndarray, mode: str = F.EVAL) -> numpy.ndarray:
        """Logits ``(batch, n_classes)``; ``(batch, M, 2B)`` input gets the single channel axis added."""
        if mode not in F.MODES:
            raise ValueError(f'unknown mode {mode!r}, expected one of {F.MODES}')
        out = self._check_batch(batch)
        for layer in self.layers:
            out = layer.forward(out, mode)
        return out

    def backward(self, logit_grads: numpy.ndarray) -> Dict[str, numpy.ndarray]:
        """Back-propagate the logit gradients in exact reverse order and return all parameter gradients."""
        upstream = numpy.asarray(logit_grads, dtype=numpy.float64)
        for layer in reversed(self.layers):
            upstream = layer.backward(upstream)
        return self.gradients()

    def predict_proba(self, batch: numpy.ndarray) -> numpy.ndarray:
        """Eval-mode class probabilities."""
        return F.softmax(self.forward(batch, F.EVAL))

    def parameters(self) -> Dict[str, numpy.ndarray]:
        """Trainable arrays by qualified name; the arrays are the live parameters."""
        return OrderedDict((f'{name}.{key}', value)
                           for name, layer in zip(self._names, self.layers)
                           for key, value in layer.params.items())

    def gradients(self) -> Dict[str, numpy.ndarray]:
        return OrderedDict((f'{name}.{key}', value)
                           for name, layer in zip(self._names, self.layers)
                           for key, value in layer.grads.items())

    def buffers(self) -> Dict[str, numpy.ndarray]:
        return OrderedDict((f'{name}.{key}', value)
                           for name, layer in zip(self._names, self.layers)
                           for key, value in layer.buffers.items())

    def state_dict(self) -> Dict[str, numpy.ndarray]:
        """Copies of all parameters and buffers."""
        state = OrderedDict((name, value.copy()) for name, value in self.parameters().items())
        state.update((name, value.copy()) for name, value in self.buffers().items())
        return state

    def load_state_dict(self, state: Dict[str, numpy.ndarray]) -> None:
        """Copy ``state`` into the live arrays.

        Raises:
            ShapeMismatchError: on missing or unexpected names or different shapes
        """
        targets = OrderedDict(self.parameters())
        targets.update(self.buffers())
        if set(state) != set(targets):
            difference = sorted(set(state).symmetric_difference(targets))
            raise ShapeMismatchError(f'state does not match the network, differing entries: {difference}')
        for name, target in targets.items():
            value = numpy.asarray(state[name])
            if value.shape != target.shape:
                raise ShapeMismatchError(f'{name} has shape {value.shape}, the network expects {target.shape}')
            target[...] = value

    @property
    def n_parameters(self) -> int:
        return int(sum(value.size for value in self.parameters().values()))

    def summary(self) -> str:
        lines = [f'{name:12s} {layer!r}' for name, layer in zip(self._names, self.layers)]
        lines.append(f'{self.n_parameters} trainable parameters')
        return '\n'.join(lines)
