# -*- coding: utf-8 -*-
"""Tests for the beam codebook, the beamformed CSI, the SNR and the link-budget calibration"""
import dataclasses
import math

import numpy
import pytest

from aiida_csi_positioning.channel import (
    NO_SIGNAL, ArrayGeometry, Building, LinkBudget, Path, PathSet, Scene, add_noise, array_response, beam_snrs,
    beamformed_csi, best_beam_snr, build_codebook, calibrate_noise, snr_per_beam, trace_paths
)
from aiida_csi_positioning.cli.config import RunConfig
from aiida_csi_positioning.exceptions import BlockedLocationError, ShapeMismatchError


def open_scene(**kwargs):
    arguments = {'bs_position': (0.0, 0.0, 10.0), 'array': ArrayGeometry(16, 8), 'n_subcarriers': 24}
    arguments.update(kwargs)
    return Scene(**arguments)


def test_codebook_shape_and_norms():
    array = ArrayGeometry(16, 8)
    codebook = build_codebook(array, 8, 4)

    assert codebook.beams.shape == (32, 128)
    assert codebook.n_beams == 32
    assert codebook.n_elements == array.n_elements
    assert numpy.allclose(numpy.linalg.norm(codebook.beams, axis=1), 1.0, atol=1e-12, rtol=0)


def test_single_beam_points_at_boresight():
    array = ArrayGeometry(4, 4, orientation=(0.4, -0.1))
    codebook = build_codebook(array, 1, 1)
    assert codebook.beam_grid[0] == pytest.approx([0.4, -0.1])


def test_array_response_unit_magnitude():
    response = array_response(ArrayGeometry(16, 8), 0.3, -0.2)
    assert response.shape == (128,)
    assert numpy.allclose(numpy.abs(response), 1.0)
    with pytest.raises(ValueError):
        array_response(ArrayGeometry(), math.nan, 0.0)


def test_aligned_path_maximizes_its_beam():
    """A single path leaving along the direction of a beam puts the most power into that beam, for any orientation"""
    rng = numpy.random.default_rng(42)
    hits = 0
    for _ in range(100):
        orientation = (rng.uniform(-math.pi, math.pi), rng.uniform(-0.3, 0.3))
        scene = open_scene(array=ArrayGeometry(16, 8, orientation=orientation), n_subcarriers=8)
        codebook = build_codebook(scene.array, 8, 4)
        beam = int(rng.integers(codebook.n_beams))
        azimuth, elevation = codebook.beam_grid[beam]
        pathset = PathSet((Path(complex(rng.uniform(0.5, 2.0)), rng.uniform(0, 1e-6), azimuth, elevation, True),))

        power = numpy.sum(numpy.abs(beamformed_csi(scene, pathset, codebook))**2, axis=0)
        hits += int(numpy.argmax(power) == beam)

    assert hits == 100


def test_empty_pathset_gives_zero_csi():
    scene = open_scene()
    codebook = build_codebook(scene.array, 4, 2)
    csi = beamformed_csi(scene, PathSet(), codebook)

    assert csi.shape == (24, 8)
    assert not numpy.any(csi)
    assert snr_per_beam(csi[:, 0], 1.0) == NO_SIGNAL
    assert numpy.all(beam_snrs(csi, 1.0) == NO_SIGNAL)


def test_codebook_must_match_array():
    scene = open_scene()
    codebook = build_codebook(ArrayGeometry(4, 4), 2, 2)
    with pytest.raises(ShapeMismatchError):
        beamformed_csi(scene, trace_paths(scene, (30.0, 0.0)), codebook)


def test_snr_scaling_law():
    """Ten times the amplitude is twenty decibels more"""
    rng = numpy.random.default_rng(0)
    for _ in range(20):
        received = rng.standard_normal(60) + 1j * rng.standard_normal(60)
        noise_power = rng.uniform(1e-3, 10.0)
        difference = snr_per_beam(10.0 * received, noise_power) - snr_per_beam(received, noise_power)
        assert abs(difference - 20.0) < 1e-9


def test_snr_definition():
    received = numpy.full(10, 2.0 + 0.0j)
    assert snr_per_beam(received, 0.4) == pytest.approx(10.0, abs=1e-12)
    with pytest.raises(ValueError):
        snr_per_beam(received, 0.0)


@pytest.mark.parametrize('orientation', [(0.0, 0.0), (0.5, -0.1), (-1.2, 0.05)])
def test_calibration_hits_target_snr(orientation):
    scene = open_scene(array=ArrayGeometry(16, 8, orientation=orientation))
    codebook = build_codebook(scene.array, 8, 4)
    budget = calibrate_noise(scene, codebook, target_snr_db=10.0, calibration_distance=100.0)

    anchor = (100.0 * math.cos(orientation[0]), 100.0 * math.sin(orientation[0]))
    csi = beamformed_csi(scene, trace_paths(scene, anchor), codebook)

    assert abs(best_beam_snr(csi, budget.noise_power) - 10.0) < 0.01
    assert budget.tx_gain == scene.tx_gain


def test_calibration_needs_line_of_sight():
    scene = open_scene(buildings=(Building(40.0, -5.0, 50.0, 5.0, 30.0),))
    codebook = build_codebook(scene.array, 4, 2)
    with pytest.raises(BlockedLocationError):
        calibrate_noise(scene, codebook)


def test_noise_is_seeded_and_has_the_calibrated_power():
    """Over a hundred thousand draws the empirical variance is within two percent of the calibrated power"""
    csi = numpy.zeros((1000, 100), dtype=complex)
    budget = LinkBudget(noise_power=0.25)

    first = add_noise(csi, budget, numpy.random.default_rng(5))
    second = add_noise(csi, budget, numpy.random.default_rng(5))

    assert numpy.array_equal(first, second)
    assert numpy.mean(numpy.abs(first)**2) == pytest.approx(0.25, rel=0.02)
    assert numpy.mean(first.real**2) == pytest.approx(0.125, rel=0.02)
    assert numpy.mean(first.imag**2) == pytest.approx(0.125, rel=0.02)


def test_link_budget_needs_positive_noise():
    with pytest.raises(ValueError):
        LinkBudget(noise_power=0.0)


def scattered_paths(rng, count):
    return PathSet(
        tuple(
            Path(
                complex(rng.standard_normal(), rng.standard_normal()), rng.uniform(0.0, 2e-6), rng.uniform(-1.5, 1.5),
                rng.uniform(-0.5, 0.5)
            ) for _ in range(count)
        )
    )


def test_csi_is_linear_in_the_path_gains():
    scene = open_scene()
    codebook = build_codebook(scene.array, 8, 4)
    rng = numpy.random.default_rng(3)
    first, second = scattered_paths(rng, 3), scattered_paths(rng, 2)
    factor = 0.7 - 1.9j

    csi = beamformed_csi(scene, first, codebook)
    scale = numpy.max(numpy.abs(csi))
    scaled = beamformed_csi(scene, first.scaled(factor), codebook)
    assert numpy.max(numpy.abs(scaled - factor * csi)) <= 1e-12 * abs(factor) * scale

    combined = beamformed_csi(scene, PathSet(first.paths + second.paths), codebook)
    separate = csi + beamformed_csi(scene, second, codebook)
    assert numpy.max(numpy.abs(combined - separate)) <= 1e-12 * numpy.max(numpy.abs(separate))


def test_zero_delay_path_is_flat_across_subcarriers():
    scene = open_scene()
    codebook = build_codebook(scene.array, 4, 2)
    pathset = PathSet((Path(1.5 - 0.5j, 0.0, 0.3, -0.1, True),))
    csi = beamformed_csi(scene, pathset, codebook)

    assert numpy.max(numpy.abs(csi - csi[0])) <= 1e-12 * numpy.max(numpy.abs(csi))


def test_calibrated_noise_scales_with_the_transmit_power():
    """Doubling the transmit gain quadruples the calibrated noise power"""
    scene = open_scene()
    codebook = build_codebook(scene.array, 8, 4)
    base = calibrate_noise(scene, codebook)
    doubled = calibrate_noise(dataclasses.replace(scene, tx_gain=2.0 * scene.tx_gain), codebook)

    assert doubled.noise_power == pytest.approx(4.0 * base.noise_power, rel=1e-12)
    assert doubled.tx_gain == 2.0 * scene.tx_gain


@pytest.mark.parametrize('filename', ['desk.ini', 'full.ini'])
def test_shipped_geometry_follows_the_distance_law(config_path, filename):
    """Calibrated to 10 dB at 100 m, the best beam at 200 m is six decibels down on the shipped array and codebook"""
    config = RunConfig.from_file(config_path(filename))
    scene = dataclasses.replace(
        config.scene, buildings=(), reference_points=(), test_points=(), reference_names=(), test_names=()
    )
    codebook = build_codebook(scene.array, config.n_az_beams, config.n_el_beams)
    budget = calibrate_noise(scene, codebook, target_snr_db=10.0, calibration_distance=100.0)

    x_bs, y_bs, z_bs = scene.bs_position
    far = (x_bs + 200.0 * math.cos(scene.array.orientation[0]), y_bs + 200.0 * math.sin(scene.array.orientation[0]))
    snr = best_beam_snr(beamformed_csi(scene, trace_paths(scene, far), codebook), budget.noise_power)

    height = z_bs - scene.ue_height
    exact = 10.0 - 20.0 * math.log10(math.hypot(200.0, height) / math.hypot(100.0, height))
    assert snr == pytest.approx(exact, abs=0.02)
    assert snr == pytest.approx(10.0 - 20.0 * math.log10(2.0), abs=0.1)
