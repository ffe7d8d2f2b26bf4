# -*- coding: utf-8 -*-
"""Central finite-difference verification of the analytic gradients, per layer and for a whole small network.

Checks run in float64. A scalar loss ``sum(output * R)`` with a random ``R`` exercises every output direction. ReLU and
max-pool inputs are drawn away from their kinks so that the finite differences never straddle one.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy

from aiida_csi_positioning.utils.log import get_logger

from . import functional as F
from .layers import BatchNorm, Conv2D, Linear, MaxPool2D, ReLU
from .network import Network, NetworkConfig

LOGGER = get_logger('nn.gradcheck')

DEFAULT_EPS = 1e-5
DEFAULT_TOLERANCE = 1e-4


def numerical_gradient(func: Callable[[], float], array: numpy.ndarray, eps: float = DEFAULT_EPS) -> numpy.ndarray:
    """Central differences of ``func()`` with respect to every entry of ``array``, which is perturbed in place."""
    gradient = numpy.zeros_like(array, dtype=numpy.float64)
    for index in numpy.ndindex(array.shape):
        original = array[index]
        array[index] = original + eps
        plus = func()
        array[index] = original - eps
        minus = func()
        array[index] = original
        gradient[index] = (plus - minus) / (2.0 * eps)
    return gradient


def relative_error(analytic, numeric, floor: float = 1e-10) -> float:
    """``max|a - n| / max(|a|_inf, |n|_inf, floor)``."""
    analytic = numpy.asarray(analytic, dtype=numpy.float64)
    numeric = numpy.asarray(numeric, dtype=numpy.float64)
    if analytic.size == 0:
        return 0.0
    scale = max(float(numpy.max(numpy.abs(analytic))), float(numpy.max(numpy.abs(numeric))), floor)
    return float(numpy.max(numpy.abs(analytic - numeric))) / scale


def _combined_error(pairs) -> float:
    analytic = numpy.concatenate([numpy.ravel(a) for a, _ in pairs])
    numeric = numpy.concatenate([numpy.ravel(n) for _, n in pairs])
    return relative_error(analytic, numeric)


def _away_from_zero(rng, shape, margin=1e-3):
    values = rng.standard_normal(shape)
    small = numpy.abs(values) < margin
    values[small] = numpy.copysign(margin + rng.random(int(small.sum())), values[small])
    return values


def check_conv2d(rng: numpy.random.Generator, eps: float = DEFAULT_EPS) -> float:
    """Gradient error of the convolution with respect to input, weight and bias."""
    batch, in_channels, out_channels = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4)
    k_h, k_w = rng.integers(1, 4), rng.integers(1, 4)
    stride, padding = int(rng.integers(1, 3)), int(rng.integers(0, 2))
    height, width = int(rng.integers(k_h, 7)), int(rng.integers(k_w, 7))
    x = rng.standard_normal((batch, in_channels, height, width))
    weight = rng.standard_normal((out_channels, in_channels, k_h, k_w))
    bias = rng.standard_normal(out_channels)
    out, cache = F.conv2d_forward(x, weight, bias, stride, padding)
    upstream = rng.standard_normal(out.shape)
    x_grad, w_grad, b_grad = F.conv2d_backward(upstream, cache)

    def loss():
        return float(numpy.sum(F.conv2d_forward(x, weight, bias, stride, padding)[0] * upstream))

    return _combined_error([(x_grad, numerical_gradient(loss, x, eps)), (w_grad, numerical_gradient(loss, weight, eps)),
                            (b_grad, numerical_gradient(loss, bias, eps))])


def check_relu(rng: numpy.random.Generator, eps: float = DEFAULT_EPS) -> float:
    x = _away_from_zero(rng, (int(rng.integers(1, 4)), 2, 3, 4))
    out, cache = F.relu_forward(x)
    upstream = rng.standard_normal(out.shape)

    def loss():
        return float(numpy.sum(F.relu_forward(x)[0] * upstream))

    return relative_error(F.relu_backward(upstream, cache), numerical_gradient(loss, x, eps))


def check_maxpool2d(rng: numpy.random.Generator, eps: float = DEFAULT_EPS) -> float:
    window = (int(rng.integers(1, 4)), int(rng.integers(1, 4)))
    stride = (int(rng.integers(1, 3)), int(rng.integers(1, 3)))
    shape = (int(rng.integers(1, 3)), int(rng.integers(1, 3)), int(rng.integers(window[0], 7)),
             int(rng.integers(window[1], 7)))
    # distinct values spaced far beyond eps keep every argmax stable
    x = rng.permutation(int(numpy.prod(shape))).reshape(shape) * 0.1 + rng.random(shape) * 0.01
    out, cache = F.maxpool2d_forward(x, window, stride)
    upstream = rng.standard_normal(out.shape)

    def loss():
        return float(numpy.sum(F.maxpool2d_forward(x, window, stride)[0] * upstream))

    return relative_error(F.maxpool2d_backward(upstream, cache), numerical_gradient(loss, x, eps))


def _check_batchnorm(rng, shape, mode, eps):
    channels = shape[1]
    x = rng.standard_normal(shape) * 2.0 + 0.5
    gamma = 1.0 + 0.5 * rng.standard_normal(channels)
    beta = rng.standard_normal(channels)
    running_mean = rng.standard_normal(channels)
    running_var = 0.5 + rng.random(channels)

    def forward():
        return F.batchnorm_forward(x, gamma, beta, running_mean, running_var, mode)

    out, cache, _, _ = forward()
    upstream = rng.standard_normal(out.shape)
    x_grad, gamma_grad, beta_grad = F.batchnorm_backward(upstream, cache)

    def loss():
        return float(numpy.sum(forward()[0] * upstream))

    return _combined_error([(x_grad, numerical_gradient(loss, x, eps)),
                            (gamma_grad, numerical_gradient(loss, gamma, eps)),
                            (beta_grad, numerical_gradient(loss, beta, eps))])


def check_batchnorm2d(rng: numpy.random.Generator, eps: float = DEFAULT_EPS) -> float:
    shape = (int(rng.integers(2, 4)), int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(2, 4)))
    return _check_batchnorm(rng, shape, F.TRAIN if rng.random() < 0.75 else F.EVAL, eps)


def check_batchnorm1d(rng: numpy.random.Generator, eps: float = DEFAULT_EPS) -> float:
    shape = (int(rng.integers(2, 6)), int(rng.integers(1, 6)))
    return _check_batchnorm(rng, shape, F.TRAIN if rng.random() < 0.75 else F.EVAL, eps)


def check_linear(rng: numpy.random.Generator, eps: float = DEFAULT_EPS) -> float:
    batch, n_in, n_out = int(rng.integers(1, 5)), int(rng.integers(1, 6)), int(rng.integers(1, 6))
    x = rng.standard_normal((batch, n_in))
    weight = rng.standard_normal((n_out, n_in))
    bias = rng.standard_normal(n_out)
    out, cache = F.linear_forward(x, weight, bias)
    upstream = rng.standard_normal(out.shape)
    x_grad, w_grad, b_grad = F.linear_backward(upstream, cache)

    def loss():
        return float(numpy.sum(F.linear_forward(x, weight, bias)[0] * upstream))

    return _combined_error([(x_grad, numerical_gradient(loss, x, eps)), (w_grad, numerical_gradient(loss, weight, eps)),
                            (b_grad, numerical_gradient(loss, bias, eps))])


def check_softmax_nll(rng: numpy.random.Generator, eps: float = DEFAULT_EPS) -> float:
    """Gradient error of the mean NLL of softmax probabilities with respect to the logits."""
    batch, n_classes = int(rng.integers(1, 5)), int(rng.integers(2, 8))
    logits = 2.0 * rng.standard_normal((batch, n_classes))
    labels = rng.integers(n_classes, size=batch)
    probs = F.softmax(logits)
    _, gradient = F.nll_loss(probs, labels)

    def loss():
        return F.nll_loss(F.softmax(logits), labels)[0]

    return relative_error(gradient, numerical_gradient(loss, logits, eps))


LAYER_CHECKS: Dict[str, Callable[[numpy.random.Generator, float], float]] = {
    'conv2d': check_conv2d,
    'relu': check_relu,
    'maxpool2d': check_maxpool2d,
    'batchnorm2d': check_batchnorm2d,
    'batchnorm1d': check_batchnorm1d,
    'linear': check_linear,
    'softmax_nll': check_softmax_nll,
}


def tiny_network_config(n_classes: int = 2, init_seed: int = 0) -> NetworkConfig:
    """A 1 x 12 x 8 input network with single-channel convolutions and overlapping 2x2 pools."""
    return NetworkConfig(
        input_shape=(1, 12, 8),
        n_classes=n_classes,
        conv_channels=(1, 1, 1, 1, 1),
        pool_windows=((2, 2),) * 4,
        pool_strides=((1, 1),) * 4,
        init_seed=init_seed,
    )


def kink_margin(network: Network) -> float:
    """Smallest distance of the last forward pass from a ReLU kink or a max-pool tie.

    Pool windows whose maximum is zero are ignored: they only hold inactive ReLU outputs, whose gradient is zero
    whichever position wins.
    """
    margin = numpy.inf
    for layer in network.layers:
        if isinstance(layer, ReLU) and layer.last_input is not None:
            margin = min(margin, float(numpy.min(numpy.abs(layer.last_input))))
        elif isinstance(layer, MaxPool2D) and layer.last_input is not None:
            windows = numpy.lib.stride_tricks.sliding_window_view(layer.last_input, layer.window, axis=(2, 3))
            windows = windows[:, :, ::layer.stride[0], ::layer.stride[1]]
            flat = windows.reshape(windows.shape[:4] + (-1,))
            if flat.shape[-1] < 2:
                continue
            top = numpy.sort(flat, axis=-1)[..., -2:]
            gaps = (top[..., 1] - top[..., 0])[top[..., 1] > 0]
            if gaps.size:
                margin = min(margin, float(gaps.min()))
    return margin


@dataclass
class GradcheckResult:
    max_error: float
    errors: Dict[str, float] = field(default_factory=dict)
    attempts: int = 1


def check_network_gradients(
    config: NetworkConfig = None,
    batch_size: int = 3,
    seed: int = 0,
    eps: float = DEFAULT_EPS,
    margin: float = 1e-3,
    max_attempts: int = 500,
) -> GradcheckResult:
    """Compare the back-propagated gradient of every parameter with finite differences of the train-mode loss.

    Parameters are randomized (including the classifier head and the batch-norm affine terms) and draws whose forward
    pass comes within ``margin`` of a kink are rejected.

    Raises:
        ValueError: if no acceptable draw was found within ``max_attempts``
    """
    config = tiny_network_config() if config is None else config
    rng = numpy.random.default_rng(seed)

    for attempt in range(1, max_attempts + 1):
        network = Network(config.replace(init_seed=int(rng.integers(2**31))))
        for layer in network.layers:
            if isinstance(layer, Conv2D):
                layer.params['bias'][...] = 0.1 * rng.standard_normal(layer.params['bias'].shape)
            elif isinstance(layer, Linear):
                layer.params['weight'][...] = rng.standard_normal(layer.params['weight'].shape)
                layer.params['bias'][...] = rng.standard_normal(layer.params['bias'].shape)
            elif isinstance(layer, BatchNorm):
                layer.params['gamma'][...] = 1.0 + 0.2 * rng.standard_normal(layer.params['gamma'].shape)
                layer.params['beta'][...] = 0.2 * rng.standard_normal(layer.params['beta'].shape)
        batch = rng.standard_normal((batch_size,) + config.input_shape)
        labels = rng.integers(config.n_classes, size=batch_size)
        logits = network.forward(batch, F.TRAIN)
        if kink_margin(network) >= margin:
            break
    else:
        raise ValueError(f'no draw kept a margin of {margin} from every kink in {max_attempts} attempts')

    _, logit_grads, _ = F.softmax_nll(logits, labels)
    analytic = {name: value.copy() for name, value in network.backward(logit_grads).items()}

    def loss():
        return F.softmax_nll(network.forward(batch, F.TRAIN), labels)[0]

    pairs, errors = [], {}
    for name, param in network.parameters().items():
        numeric = numerical_gradient(loss, param, eps)
        errors[name] = relative_error(analytic[name], numeric)
        pairs.append((analytic[name], numeric))

    result = GradcheckResult(max_error=_combined_error(pairs), errors=errors, attempts=attempt)
    LOGGER.debug(f'network gradient check: max relative error {result.max_error:.3e} after {attempt} draws')
    return result


def run_gradient_checks(trials: int = 100, network_trials: int = 5, seed: int = 0,
                        eps: float = DEFAULT_EPS) -> Dict[str, float]:
    """Worst relative error per layer kind over ``trials`` random instances, plus the whole tiny network."""
    rng = numpy.random.default_rng(seed)
    worst = {}
    for kind, check in LAYER_CHECKS.items():
        worst[kind] = max(check(rng, eps) for _ in range(trials))
    worst['network'] = max(
        check_network_gradients(seed=int(rng.integers(2**31)), eps=eps).max_error for _ in range(network_trials)
    )
    return worst
