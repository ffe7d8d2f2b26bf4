# -*- coding: utf-8 -*-
"""Effective beamformed CSI, receiver noise, per-beam SNR and the link-budget calibration."""
import math
from dataclasses import dataclass

import numpy

from aiida_csi_positioning.exceptions import BlockedLocationError, ShapeMismatchError
from aiida_csi_positioning.utils.log import get_logger

from .beams import BeamCodebook, array_responses
from .geometry import PathSet, Scene, trace_paths

LOGGER = get_logger('channel.csi')

#: SNR reported for a beam that received nothing at all.
NO_SIGNAL = float('-inf')


@dataclass(frozen=True)
class LinkBudget:
    """Receiver noise power ``sigma^2`` (linear) and the transmit gain it was calibrated for."""

    noise_power: float
    tx_gain: float = 1.0

    def __post_init__(self):
        if not self.noise_power > 0:
            raise ValueError(f'noise power must be positive, got {self.noise_power}')


def beamformed_csi(scene: Scene, pathset: PathSet, codebook: BeamCodebook) -> numpy.ndarray:
    """Noiseless effective CSI ``H_{m,b} F_b`` for every subcarrier ``m`` and beam ``b``.

    Entry ``(m, b)`` is ``sum_l g_l exp(-j 2 pi f_m tau_l) a_l^H F_b`` with ``f_m`` the subcarrier offset from the
    carrier.
    The transmitted reference symbol is one on every resource element.

    Returns:
        numpy.ndarray: complex matrix of shape ``(M, B)``
    """
    if codebook.n_elements != scene.array.n_elements:
        raise ShapeMismatchError(
            f'codebook beams have {codebook.n_elements} weights but the array has {scene.array.n_elements} elements'
        )

    n_subcarriers, n_beams = scene.n_subcarriers, codebook.n_beams
    if len(pathset) == 0:
        return numpy.zeros((n_subcarriers, n_beams), dtype=complex)

    gains = numpy.array([path.complex_gain for path in pathset], dtype=complex)
    delays = numpy.array([path.delay for path in pathset], dtype=float)
    azimuths = numpy.array([path.azimuth_departure for path in pathset], dtype=float)
    elevations = numpy.array([path.elevation_departure for path in pathset], dtype=float)

    responses = array_responses(scene.array, azimuths, elevations)
    beam_gains = responses.conj() @ codebook.beams.T
    phases = numpy.exp(-2j * math.pi * numpy.outer(scene.subcarrier_offsets(), delays))

    return phases @ (gains[:, None] * beam_gains)


def add_noise(csi: numpy.ndarray, budget: LinkBudget, rng: numpy.random.Generator) -> numpy.ndarray:
    """Add circularly-symmetric complex Gaussian noise of variance ``sigma^2`` per entry.

    The real parts of all entries are drawn first, then the imaginary parts, so the result is a deterministic function
    of the generator state.
    """
    scale = math.sqrt(budget.noise_power / 2.0)
    real = rng.standard_normal(csi.shape)
    imag = rng.standard_normal(csi.shape)
    return csi + scale * (real + 1j * imag)


def snr_per_beam(received: numpy.ndarray, noise_power: float) -> float:
    """SNR of one beam in dB: ``10 log10(sum_m |r_m|^2 / (M sigma^2))``.

    Returns :data:`NO_SIGNAL` when the received vector is identically zero.
    """
    if not noise_power > 0:
        raise ValueError(f'noise power must be positive, got {noise_power}')
    received = numpy.asarray(received)
    energy = float(numpy.sum(numpy.abs(received)**2))
    if energy == 0.0:
        return NO_SIGNAL
    return 10.0 * math.log10(energy / (received.shape[0] * noise_power))


def beam_snrs(csi: numpy.ndarray, noise_power: float) -> numpy.ndarray:
    """:func:`snr_per_beam` for every column of an ``(M, B)`` matrix."""
    return numpy.array([snr_per_beam(csi[:, beam], noise_power) for beam in range(csi.shape[1])])


def best_beam_snr(csi: numpy.ndarray, noise_power: float) -> float:
    """Largest per-beam SNR of an ``(M, B)`` matrix, in dB."""
    return float(numpy.max(beam_snrs(csi, noise_power)))


def calibrate_noise(
    scene: Scene,
    codebook: BeamCodebook,
    target_snr_db: float = 10.0,
    calibration_distance: float = 100.0
) -> LinkBudget:
    """Choose ``sigma^2`` so that the best beam reaches ``target_snr_db`` at a LOS point along the boresight azimuth.

    That point is ``calibration_distance`` meters (ground distance) from the base station. The noiseless signal is used,
    so the result is exact in closed form.

    Raises:
        BlockedLocationError: if the calibration point lies in a building or has no line of sight
    """
    azimuth = scene.array.orientation[0]
    anchor = (
        scene.bs_position[0] + calibration_distance * math.cos(azimuth),
        scene.bs_position[1] + calibration_distance * math.sin(azimuth),
    )
    pathset = trace_paths(scene, anchor)
    if not pathset.has_los:
        raise BlockedLocationError(f'calibration point {anchor} has no line of sight to the base station')

    csi = beamformed_csi(scene, pathset, codebook)
    best_energy = float(numpy.max(numpy.sum(numpy.abs(csi)**2, axis=0)))
    noise_power = best_energy / (scene.n_subcarriers * 10.0**(target_snr_db / 10.0))
    LOGGER.info(f'calibrated noise power {noise_power:.6e} for {target_snr_db} dB at {calibration_distance} m')
    return LinkBudget(noise_power=noise_power, tx_gain=scene.tx_gain)


#EOF
