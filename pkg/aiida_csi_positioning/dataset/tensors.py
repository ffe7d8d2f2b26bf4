# -*- coding: utf-8 -*-
"""Packing of complex CSI matrices into the real-valued network input and back."""
import numpy

from aiida_csi_positioning.exceptions import NonFiniteError, ShapeMismatchError


def to_real_tensor(csi: numpy.ndarray, dtype=numpy.float64) -> numpy.ndarray:
    """Interleave real and imaginary parts by column: ``M x B`` complex to ``M x 2B`` real.

    Column ``2b`` holds the real part of beam ``b`` and column ``2b + 1`` its imaginary part. A leading batch axis is
    allowed.

    Raises:
        NonFiniteError: if any entry is NaN or infinite
    """
    csi = numpy.asarray(csi)
    if csi.ndim < 2:
        raise ShapeMismatchError(f'expected at least a 2-D matrix, got shape {csi.shape}')
    if not numpy.all(numpy.isfinite(csi)):
        raise NonFiniteError('CSI matrix contains non-finite entries')
    tensor = numpy.empty(csi.shape[:-1] + (2 * csi.shape[-1],), dtype=dtype)
    tensor[..., 0::2] = csi.real
    tensor[..., 1::2] = csi.imag
    return tensor


def from_real_tensor(tensor: numpy.ndarray) -> numpy.ndarray:
    """Inverse of :func:`to_real_tensor`."""
    tensor = numpy.asarray(tensor)
    if tensor.ndim < 2 or tensor.shape[-1] % 2:
        raise ShapeMismatchError(f'expected an even number of columns, got shape {tensor.shape}')
    csi = numpy.empty(tensor.shape[:-1] + (tensor.shape[-1] // 2,), dtype=numpy.complex128)
    csi.real = tensor[..., 0::2]
    csi.imag = tensor[..., 1::2]
    return csi
