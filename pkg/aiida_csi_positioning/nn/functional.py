# -*- coding: utf-8 -*-
"""Forward and backward kernels of the network layers, written against plain numpy arrays.

Every ``*_forward`` returns the output and a cache; the matching ``*_backward`` takes the upstream gradient and that
cache. Images are ``(batch, channels, height, width)``, feature matrices ``(batch, features)``.
"""
import numpy
from numpy.lib.stride_tricks import sliding_window_view

from aiida_csi_positioning.exceptions import ShapeMismatchError

TRAIN = 'train'
EVAL = 'eval'
MODES = (TRAIN, EVAL)


def _pair(value):
    if isinstance(value, (tuple, list)):
        return int(value[0]), int(value[1])
    return int(value), int(value)


def output_size(size: int, kernel: int, stride: int, padding: int = 0) -> int:
    """Spatial output length of a sliding window; non-positive means the window does not fit."""
    return (size + 2 * padding - kernel) // stride + 1 if size + 2 * padding >= kernel else 0


def conv2d_forward(x: numpy.ndarray, weight: numpy.ndarray, bias: numpy.ndarray, stride=1, padding=0):
    """Cross-correlation of ``x`` with ``weight`` of shape ``(out, in, kh, kw)`` plus ``bias``.

    Raises:
        ShapeMismatchError: on channel disagreement or a kernel larger than the padded input
    """
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatchError(f'cannot convolve input {x.shape} with kernel {weight.shape}')
    stride, padding = _pair(stride), _pair(padding)
    _, _, height, width = x.shape
    _, _, k_h, k_w = weight.shape
    out_h = output_size(height, k_h, stride[0], padding[0])
    out_w = output_size(width, k_w, stride[1], padding[1])
    if out_h < 1 or out_w < 1:
        raise ShapeMismatchError(f'kernel {k_h}x{k_w} does not fit the padded input {x.shape}')

    padded = numpy.pad(x, ((0, 0), (0, 0), (padding[0], padding[0]), (padding[1], padding[1])))
    windows = sliding_window_view(padded, (k_h, k_w), axis=(2, 3))[:, :, ::stride[0], ::stride[1]]
    out = numpy.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    out = out + bias[None, :, None, None]
    return numpy.ascontiguousarray(out), (x.shape, padded.shape, windows, weight, stride, padding)


def conv2d_backward(upstream: numpy.ndarray, cache):
    """Gradients ``(input, weight, bias)`` of :func:`conv2d_forward`."""
    x_shape, padded_shape, windows, weight, stride, padding = cache
    _, _, out_h, out_w = upstream.shape
    _, _, k_h, k_w = weight.shape

    bias_grad = upstream.sum(axis=(0, 2, 3))
    weight_grad = numpy.tensordot(upstream, windows, axes=([0, 2, 3], [0, 2, 3]))

    padded_grad = numpy.zeros(padded_shape, dtype=upstream.dtype)
    for i in range(k_h):
        for j in range(k_w):
            contribution = numpy.tensordot(upstream, weight[:, :, i, j], axes=([1], [0])).transpose(0, 3, 1, 2)
            padded_grad[:, :, i:i + stride[0] * out_h:stride[0], j:j + stride[1] * out_w:stride[1]] += contribution

    height, width = x_shape[2], x_shape[3]
    input_grad = padded_grad[:, :, padding[0]:padding[0] + height, padding[1]:padding[1] + width]
    return numpy.ascontiguousarray(input_grad), weight_grad, bias_grad


def relu_forward(x: numpy.ndarray):
    return numpy.maximum(x, 0.0), x > 0


def relu_backward(upstream: numpy.ndarray, cache):
    return upstream * cache


def maxpool2d_forward(x: numpy.ndarray, window=2, stride=2):
    """Per-window maximum; trailing rows and columns that do not fill a window are dropped.

    Raises:
        ShapeMismatchError: if the window is larger than the input
    """
    window, stride = _pair(window), _pair(stride)
    if x.ndim != 4 or window[0] > x.shape[2] or window[1] > x.shape[3]:
        raise ShapeMismatchError(f'pooling window {window} larger than input {x.shape}')

    windows = sliding_window_view(x, window, axis=(2, 3))[:, :, ::stride[0], ::stride[1]]
    flat = windows.reshape(windows.shape[:4] + (window[0] * window[1],))
    argmax = flat.argmax(axis=-1)
    out = numpy.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]
    return out, (x.shape, argmax, window, stride)


def maxpool2d_backward(upstream: numpy.ndarray, cache):
    """Route every upstream entry to the first maximal position of its window."""
    x_shape, argmax, window, stride = cache
    batch, channels, out_h, out_w = upstream.shape
    offset_h, offset_w = numpy.divmod(argmax, window[1])
    rows = numpy.arange(out_h)[None, None, :, None] * stride[0] + offset_h
    cols = numpy.arange(out_w)[None, None, None, :] * stride[1] + offset_w
    samples = numpy.broadcast_to(numpy.arange(batch)[:, None, None, None], upstream.shape)
    planes = numpy.broadcast_to(numpy.arange(channels)[None, :, None, None], upstream.shape)

    input_grad = numpy.zeros(x_shape, dtype=upstream.dtype)
    numpy.add.at(input_grad, (samples, planes, rows, cols), upstream)
    return input_grad


def _channel_axes(x: numpy.ndarray):
    if x.ndim == 4:
        return (0, 2, 3), (1, -1, 1, 1)
    if x.ndim == 2:
        return (0,), (1, -1)
    raise ShapeMismatchError(f'batch normalization expects 2-D or 4-D input, got shape {x.shape}')


def batchnorm_forward(
    x: numpy.ndarray,
    gamma: numpy.ndarray,
    beta: numpy.ndarray,
    running_mean: numpy.ndarray,
    running_var: numpy.ndarray,
    mode: str = TRAIN,
    momentum: float = 0.1,
    eps: float = 1e-5,
):
    """Per-channel normalization; channels are axis 1 of 4-D input and the features of 2-D input.

    In train mode the batch statistics normalize (biased variance) and the running statistics are returned updated
    with ``momentum`` (unbiased variance). In eval mode the running statistics normalize and are returned unchanged.

    Returns:
        tuple: output, cache, running mean, running variance

    Raises:
        ValueError: on a population of fewer than two values per channel in train mode
    """
    axes, shape = _channel_axes(x)
    if x.shape[1] != gamma.shape[0]:
        raise ShapeMismatchError(f'{x.shape[1]} channels for batch normalization over {gamma.shape[0]}')
    if mode not in MODES:
        raise ValueError(f'unknown mode {mode!r}, expected one of {MODES}')

    if mode == TRAIN:
        population = x.size // x.shape[1]
        if population < 2:
            raise ValueError('batch normalization in train mode needs at least two values per channel')
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        running_mean = (1.0 - momentum) * running_mean + momentum * mean
        running_var = (1.0 - momentum) * running_var + momentum * var * population / (population - 1)
    else:
        mean, var = running_mean, running_var

    inv_std = 1.0 / numpy.sqrt(var + eps)
    normalized = (x - mean.reshape(shape)) * inv_std.reshape(shape)
    out = gamma.reshape(shape) * normalized + beta.reshape(shape)
    return out, (normalized, inv_std, gamma, axes, shape, mode), running_mean, running_var


def batchnorm_backward(upstream: numpy.ndarray, cache):
    """Gradients ``(input, gamma, beta)`` of :func:`batchnorm_forward`, through the batch statistics in train mode."""
    normalized, inv_std, gamma, axes, shape, mode = cache
    gamma_grad = (upstream * normalized).sum(axis=axes)
    beta_grad = upstream.sum(axis=axes)
    normalized_grad = upstream * gamma.reshape(shape)

    if mode == EVAL:
        return normalized_grad * inv_std.reshape(shape), gamma_grad, beta_grad

    population = upstream.size // upstream.shape[1]
    input_grad = inv_std.reshape(shape) / population * (
        population * normalized_grad - normalized_grad.sum(axis=axes).reshape(shape) -
        normalized * (normalized_grad * normalized).sum(axis=axes).reshape(shape)
    )
    return input_grad, gamma_grad, beta_grad


def flatten(x: numpy.ndarray):
    """Row-major flatten of every sample; the cache is the original shape."""
    return x.reshape(x.shape[0], -1), x.shape


def unflatten(upstream: numpy.ndarray, shape):
    return upstream.reshape(shape)


def linear_forward(x: numpy.ndarray, weight: numpy.ndarray, bias: numpy.ndarray):
    """``z = x W^T + b`` with ``weight`` of shape ``(out, in)``."""
    if x.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatchError(f'cannot apply a {weight.shape} linear layer to input {x.shape}')
    return x @ weight.T + bias, (x, weight)


def linear_backward(upstream: numpy.ndarray, cache):
    x, weight = cache
    return upstream @ weight, upstream.T @ x, upstream.sum(axis=0)


def softmax(logits: numpy.ndarray) -> numpy.ndarray:
    """Softmax along the last axis, shifted by the maximum logit."""
    logits = numpy.asarray(logits, dtype=numpy.float64)
    shifted = numpy.exp(logits - logits.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def _check_classes(true_class, n_classes: int) -> numpy.ndarray:
    classes = numpy.asarray(true_class, dtype=numpy.int64)
    if numpy.any(classes < 0) or numpy.any(classes >= n_classes):
        raise ValueError(f'class index out of range [0, {n_classes})')
    return classes


def nll_loss(probs: numpy.ndarray, true_class):
    """Negative log likelihood of the true class and the gradient with respect to the logits.

    A single probability vector gives ``-log p_true`` and ``p - onehot``. A ``(batch, N)`` matrix gives the mean loss
    and ``(p - onehot) / batch``.

    Raises:
        ValueError: if a class index is out of range
    """
    probs = numpy.asarray(probs, dtype=numpy.float64)
    classes = _check_classes(true_class, probs.shape[-1])
    with numpy.errstate(divide='ignore'):
        if probs.ndim == 1:
            gradient = probs.copy()
            gradient[classes] -= 1.0
            return float(-numpy.log(probs[classes])), gradient
        rows = numpy.arange(probs.shape[0])
        gradient = probs.copy()
        gradient[rows, classes] -= 1.0
        return float(-numpy.log(probs[rows, classes]).mean()), gradient / probs.shape[0]


def softmax_nll(logits: numpy.ndarray, true_class):
    """Mean NLL computed from logits with a log-sum-exp, the logit gradient and the probabilities.

    Finite logits always give a finite loss, even when a probability underflows to zero.
    """
    logits = numpy.asarray(logits, dtype=numpy.float64)
    classes = _check_classes(true_class, logits.shape[-1])
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_norm = numpy.log(numpy.exp(shifted).sum(axis=-1))
    probs = softmax(logits)
    rows = numpy.arange(logits.shape[0])
    loss = float((log_norm - shifted[rows, classes]).mean())
    gradient = probs.copy()
    gradient[rows, classes] -= 1.0
    return loss, gradient / logits.shape[0], probs
