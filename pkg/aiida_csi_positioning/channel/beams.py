# -*- coding: utf-8 -*-
"""Array steering vectors and the fixed beam codebook of the base station."""
import math
from dataclasses import dataclass

import numpy

from aiida_csi_positioning.exceptions import ShapeMismatchError

from .geometry import ArrayGeometry


def direction_cosines(array: ArrayGeometry, azimuth, elevation):
    """Direction cosines ``(u, v)`` of global directions along the horizontal and vertical array axes.

    Both arguments may be scalars or arrays of equal shape; the boresight maps to ``(0, 0)``.
    """
    azimuth = numpy.asarray(azimuth, dtype=float)
    elevation = numpy.asarray(elevation, dtype=float)
    direction = numpy.stack(
        [numpy.cos(elevation) * numpy.cos(azimuth),
         numpy.cos(elevation) * numpy.sin(azimuth),
         numpy.sin(elevation)], axis=-1
    )
    _, horizontal, vertical = array.frame()
    return direction @ horizontal, direction @ vertical


def array_responses(array: ArrayGeometry, azimuth, elevation) -> numpy.ndarray:
    """Vectorized :func:`array_response` over 1-D arrays of angles, shape ``(K, N_TX)``."""
    u, v = direction_cosines(array, numpy.atleast_1d(azimuth), numpy.atleast_1d(elevation))
    p = numpy.repeat(numpy.arange(array.n_azimuth), array.n_elevation)
    q = numpy.tile(numpy.arange(array.n_elevation), array.n_azimuth)
    phase = 2.0 * math.pi * array.element_spacing * (u[:, None] * p[None, :] + v[:, None] * q[None, :])
    return numpy.exp(1j * phase)


def array_response(array: ArrayGeometry, azimuth: float, elevation: float) -> numpy.ndarray:
    """Unit-magnitude response of the array towards (azimuth, elevation) in radians.

    Element ``(p, q)`` (azimuth index ``p``, elevation index ``q``) sits at flat index ``p * n_elevation + q`` and has
    phase ``2 pi spacing (p u + q v)``.

    Returns:
        numpy.ndarray: complex vector of length ``N_TX``
    """
    if not (math.isfinite(azimuth) and math.isfinite(elevation)):
        raise ValueError(f'angles must be finite, got ({azimuth}, {elevation})')
    return array_responses(array, azimuth, elevation)[0]


@dataclass(frozen=True)
class BeamCodebook:
    """Fixed beam set: one unit-norm weight vector per row, with the global pointing angle of each beam."""

    beams: numpy.ndarray
    beam_grid: numpy.ndarray
    n_az_beams: int
    n_el_beams: int

    def __post_init__(self):
        beams = numpy.array(self.beams, dtype=complex)
        grid = numpy.array(self.beam_grid, dtype=float)
        if beams.ndim != 2 or grid.shape != (beams.shape[0], 2):
            raise ShapeMismatchError(f'inconsistent codebook shapes {beams.shape} and {grid.shape}')
        if beams.shape[0] != self.n_az_beams * self.n_el_beams:
            raise ShapeMismatchError(f'{beams.shape[0]} beams for a {self.n_az_beams}x{self.n_el_beams} grid')
        beams.setflags(write=False)
        grid.setflags(write=False)
        object.__setattr__(self, 'beams', beams)
        object.__setattr__(self, 'beam_grid', grid)

    @property
    def n_beams(self) -> int:
        return self.beams.shape[0]

    @property
    def n_elements(self) -> int:
        return self.beams.shape[1]


def build_codebook(array: ArrayGeometry, n_az_beams: int, n_el_beams: int) -> BeamCodebook:
    """Build ``n_az_beams x n_el_beams`` beams on a grid over the forward hemisphere.

    Azimuth offsets from boresight are centered in equal angular slices of ``(-pi/2, pi/2)``. Elevation offsets are
    DFT-spaced: their sines are centered in equal slices of ``(-1, 1)``, so the vertical direction cosine of each beam
    sits on a uniform grid. A single beam points at boresight. Beam ``b = i_az * n_el_beams + i_el`` is the normalized
    array response at its grid direction.
    """
    if n_az_beams < 1 or n_el_beams < 1:
        raise ValueError(f'beam counts must be at least one, got {n_az_beams}x{n_el_beams}')

    az_offsets = -math.pi / 2 + (numpy.arange(n_az_beams) + 0.5) * math.pi / n_az_beams
    el_offsets = numpy.arcsin(-1.0 + (2.0 * numpy.arange(n_el_beams) + 1.0) / n_el_beams)
    local_az = numpy.repeat(az_offsets, n_el_beams)
    local_el = numpy.tile(el_offsets, n_az_beams)

    # Local direction in the (boresight, horizontal, vertical) frame, rotated into global angles.
    local = numpy.stack(
        [numpy.cos(local_el) * numpy.cos(local_az),
         numpy.cos(local_el) * numpy.sin(local_az),
         numpy.sin(local_el)], axis=-1
    )
    direction = local @ array.frame()
    azimuth = numpy.arctan2(direction[:, 1], direction[:, 0])
    elevation = numpy.arcsin(numpy.clip(direction[:, 2], -1.0, 1.0))

    responses = array_responses(array, azimuth, elevation)
    beams = responses / numpy.linalg.norm(responses, axis=1, keepdims=True)

    return BeamCodebook(
        beams=beams,
        beam_grid=numpy.stack([azimuth, elevation], axis=-1),
        n_az_beams=n_az_beams,
        n_el_beams=n_el_beams,
    )


#EOF
