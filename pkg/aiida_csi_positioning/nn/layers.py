# -*- coding: utf-8 -*-
"""Stateful layers wrapping the kernels of :mod:`.functional`.

A layer owns its parameters, their gradients (same names and shapes), optional buffers such as the batch-norm running
statistics, and the cache of its last forward call.
"""
from collections import OrderedDict
from typing import Dict, Optional

import numpy

from . import functional as F


class Layer:
    """Base layer without parameters."""

    kind = 'layer'

    def __init__(self) -> None:
        self.params: Dict[str, numpy.ndarray] = OrderedDict()
        self.grads: Dict[str, numpy.ndarray] = OrderedDict()
        self.buffers: Dict[str, numpy.ndarray] = OrderedDict()
        self._cache = None

    def forward(self, x: numpy.ndarray, mode: str) -> numpy.ndarray:
        raise NotImplementedError

    def backward(self, upstream: numpy.ndarray) -> numpy.ndarray:
        raise NotImplementedError

    def zero_grad(self) -> None:
        for name, value in self.params.items():
            self.grads[name] = numpy.zeros_like(value)

    def _require_cache(self):
        if self._cache is None:
            raise RuntimeError(f'{self.kind}: backward called before forward')
        return self._cache

    def __repr__(self) -> str:
        return f'{type(self).__name__}()'


class Conv2D(Layer):
    kind = 'conv'

    def __init__(self, in_channels: int, out_channels: int, kernel=(3, 3), stride: int = 1, padding: int = 0) -> None:
        super().__init__()
        self.kernel = (int(kernel[0]), int(kernel[1]))
        self.stride = int(stride)
        self.padding = int(padding)
        self.params['weight'] = numpy.zeros((out_channels, in_channels) + self.kernel)
        self.params['bias'] = numpy.zeros(out_channels)
        self.zero_grad()

    def initialize(self, rng: numpy.random.Generator) -> None:
        """Zero-mean Gaussian weights with standard deviation ``sqrt(2 / fan_in)``, zero bias."""
        weight = self.params['weight']
        fan_in = weight.shape[1] * weight.shape[2] * weight.shape[3]
        weight[...] = rng.standard_normal(weight.shape) * numpy.sqrt(2.0 / fan_in)
        self.params['bias'][...] = 0.0

    def forward(self, x, mode):
        out, self._cache = F.conv2d_forward(x, self.params['weight'], self.params['bias'], self.stride, self.padding)
        return out

    def backward(self, upstream):
        input_grad, self.grads['weight'], self.grads['bias'] = F.conv2d_backward(upstream, self._require_cache())
        return input_grad

    def __repr__(self) -> str:
        out_channels, in_channels = self.params['weight'].shape[:2]
        return f'Conv2D({in_channels}->{out_channels}, kernel={self.kernel}, stride={self.stride}, pad={self.padding})'


class ReLU(Layer):
    kind = 'relu'

    def __init__(self) -> None:
        super().__init__()
        self.last_input: Optional[numpy.ndarray] = None

    def forward(self, x, mode):
        self.last_input = x
        out, self._cache = F.relu_forward(x)
        return out

    def backward(self, upstream):
        return F.relu_backward(upstream, self._require_cache())


class MaxPool2D(Layer):
    kind = 'pool'

    def __init__(self, window=(2, 2), stride=(2, 2)) -> None:
        super().__init__()
        self.window = (int(window[0]), int(window[1]))
        self.stride = (int(stride[0]), int(stride[1]))
        self.last_input: Optional[numpy.ndarray] = None

    def forward(self, x, mode):
        self.last_input = x
        out, self._cache = F.maxpool2d_forward(x, self.window, self.stride)
        return out

    def backward(self, upstream):
        return F.maxpool2d_backward(upstream, self._require_cache())

    def __repr__(self) -> str:
        return f'MaxPool2D(window={self.window}, stride={self.stride})'


class BatchNorm(Layer):
    """Batch normalization over the channels of 4-D input or the features of 2-D input."""

    kind = 'batchnorm'

    def __init__(self, n_channels: int, momentum: float = 0.1, eps: float = 1e-5) -> None:
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.params['gamma'] = numpy.ones(n_channels)
        self.params['beta'] = numpy.zeros(n_channels)
        self.buffers['running_mean'] = numpy.zeros(n_channels)
        self.buffers['running_var'] = numpy.ones(n_channels)
        self.zero_grad()

    def forward(self, x, mode):
        out, self._cache, running_mean, running_var = F.batchnorm_forward(
            x, self.params['gamma'], self.params['beta'], self.buffers['running_mean'], self.buffers['running_var'],
            mode, self.momentum, self.eps
        )
        self.buffers['running_mean'][...] = running_mean
        self.buffers['running_var'][...] = running_var
        return out

    def backward(self, upstream):
        input_grad, self.grads['gamma'], self.grads['beta'] = F.batchnorm_backward(upstream, self._require_cache())
        return input_grad

    def __repr__(self) -> str:
        return f'BatchNorm({self.params["gamma"].shape[0]})'


class Flatten(Layer):
    kind = 'flatten'

    def forward(self, x, mode):
        out, self._cache = F.flatten(x)
        return out

    def backward(self, upstream):
        return F.unflatten(upstream, self._require_cache())


class Linear(Layer):
    kind = 'linear'

    def __init__(self, in_features: int, out_features: int) -> None:
        super().__init__()
        self.params['weight'] = numpy.zeros((out_features, in_features))
        self.params['bias'] = numpy.zeros(out_features)
        self.zero_grad()

    def initialize(self, rng: numpy.random.Generator) -> None:
        """Same scheme as :meth:`Conv2D.initialize` with ``fan_in = in_features``."""
        weight = self.params['weight']
        weight[...] = rng.standard_normal(weight.shape) * numpy.sqrt(2.0 / weight.shape[1])
        self.params['bias'][...] = 0.0

    def forward(self, x, mode):
        out, self._cache = F.linear_forward(x, self.params['weight'], self.params['bias'])
        return out

    def backward(self, upstream):
        input_grad, self.grads['weight'], self.grads['bias'] = F.linear_backward(upstream, self._require_cache())
        return input_grad

    def __repr__(self) -> str:
        out_features, in_features = self.params['weight'].shape
        return f'Linear({in_features}->{out_features})'
