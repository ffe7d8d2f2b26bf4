# -*- coding: utf-8 -*-
"""Tests for the top-R weighted centroid"""
import numpy
import pytest

from aiida_csi_positioning.exceptions import NonFiniteError, ShapeMismatchError
from aiida_csi_positioning.nn import softmax
from aiida_csi_positioning.positioning import (
    ReferenceMap, euclidean_error, euclidean_errors, predict_position, predict_positions
)


def brute_force_centroid(probs, coordinates, top_r):
    """Select by repeated maximum search, lowest index first on ties, then average by hand"""
    remaining = list(range(len(probs)))
    selected = []
    for _ in range(top_r):
        best = remaining[0]
        for index in remaining:
            if probs[index] > probs[best]:
                best = index
        selected.append(best)
        remaining.remove(best)
    total = sum(probs[index] for index in selected)
    x = sum(probs[index] * coordinates[index][0] for index in selected) / total
    y = sum(probs[index] * coordinates[index][1] for index in selected) / total
    return selected, x, y


@pytest.fixture
def line_map():
    return ReferenceMap.from_points([(0.0, 0.0), (10.0, 0.0), (20.0, 0.0), (30.0, 0.0)])


def test_matches_brute_force():
    rng = numpy.random.default_rng(0)
    for _ in range(1000):
        n_classes = int(rng.integers(1, 31))
        coordinates = rng.uniform(-100.0, 100.0, (n_classes, 2))
        probs = rng.dirichlet(numpy.ones(n_classes))
        if rng.random() < 0.2:
            probs = numpy.round(probs, 1) + 1e-3
        top_r = int(rng.integers(1, n_classes + 1))

        estimate = predict_position(probs, ReferenceMap(coordinates), top_r)
        selected, x, y = brute_force_centroid(probs, coordinates, top_r)

        assert list(estimate.selected_classes) == selected
        assert abs(estimate.x - x) <= 1e-12 * max(1.0, abs(x))
        assert abs(estimate.y - y) <= 1e-12 * max(1.0, abs(y))
        assert sum(estimate.selected_weights) == pytest.approx(1.0, abs=1e-12)


def test_one_hot_returns_the_reference_point(line_map):
    estimate = predict_position([0.0, 0.0, 1.0, 0.0], line_map, top_r=3)
    assert estimate.position == (20.0, 0.0)
    assert estimate.selected_weights[0] == 1.0


def test_uniform_probabilities(line_map):
    estimate = predict_position([0.25] * 4, line_map, top_r=2)
    assert estimate.selected_classes == (0, 1)
    assert estimate.position == pytest.approx((5.0, 0.0))
    assert predict_position([0.25] * 4, line_map, top_r=4).position == pytest.approx((15.0, 0.0))


def test_ties_select_the_lower_class_id(line_map):
    estimate = predict_position([0.1, 0.3, 0.3, 0.3], line_map, top_r=2)
    assert estimate.selected_classes == (1, 2)
    assert estimate.position == pytest.approx((15.0, 0.0))


def test_r_of_one_is_the_argmax(line_map):
    assert predict_position([0.1, 0.2, 0.4, 0.3], line_map, top_r=1).position == (20.0, 0.0)


def test_invalid_requests(line_map):
    with pytest.raises(ValueError):
        predict_position([0.25] * 4, line_map, top_r=0)
    with pytest.raises(ValueError):
        predict_position([0.25] * 4, line_map, top_r=5)
    with pytest.raises(ValueError):
        predict_position([0.0, 0.0, 0.0, 0.0], line_map, top_r=2)
    with pytest.raises(ValueError):
        predict_position([0.5, -0.1, 0.3, 0.3], line_map, top_r=2)
    with pytest.raises(NonFiniteError):
        predict_position([0.5, numpy.nan, 0.3, 0.2], line_map, top_r=2)
    with pytest.raises(ShapeMismatchError):
        predict_position([0.5, 0.5], line_map, top_r=1)


def test_vectorized_decoding_agrees(line_map):
    rng = numpy.random.default_rng(1)
    probs = rng.dirichlet(numpy.ones(4), size=50)
    positions = predict_positions(probs, line_map, top_r=3)

    assert positions.shape == (50, 2)
    for row, position in zip(probs, positions):
        assert position == pytest.approx(predict_position(row, line_map, top_r=3).position, abs=1e-12)
    assert predict_positions(numpy.zeros((0, 4)), line_map, top_r=2).shape == (0, 2)


def test_reference_map_entries():
    reference_map = ReferenceMap.from_entries([(1, 5.0, 6.0), (0, 1.0, 2.0)])
    assert reference_map.entries() == [(0, 1.0, 2.0), (1, 5.0, 6.0)]
    assert reference_map.position(1) == (5.0, 6.0)
    with pytest.raises(ShapeMismatchError):
        ReferenceMap.from_entries([(0, 1.0, 2.0), (2, 5.0, 6.0)])
    with pytest.raises(NonFiniteError):
        ReferenceMap([(0.0, numpy.inf)])


def test_euclidean_errors(line_map):
    estimate = predict_position([0.0, 1.0, 0.0, 0.0], line_map, top_r=1)
    assert euclidean_error(estimate, (13.0, 4.0)) == pytest.approx(5.0)
    assert list(euclidean_errors([[0.0, 0.0], [3.0, 4.0]], [[0.0, 0.0], [0.0, 0.0]])) == [0.0, 5.0]


def test_relabeling_the_classes_keeps_the_estimate():
    """Permuting class ids together with their reference points moves nothing"""
    rng = numpy.random.default_rng(6)
    for _ in range(200):
        n_classes = int(rng.integers(2, 31))
        coordinates = rng.uniform(-100.0, 100.0, (n_classes, 2))
        probs = rng.dirichlet(numpy.ones(n_classes))
        order = rng.permutation(n_classes)
        top_r = int(rng.integers(1, n_classes + 1))

        original = predict_position(probs, ReferenceMap(coordinates), top_r)
        relabeled = predict_position(probs[order], ReferenceMap(coordinates[order]), top_r)

        assert relabeled.position == pytest.approx(original.position, rel=1e-12, abs=1e-12)
        assert sorted(order[list(relabeled.selected_classes)]) == sorted(original.selected_classes)


def test_uniform_logit_shift_keeps_the_estimate(line_map):
    rng = numpy.random.default_rng(9)
    for _ in range(100):
        logits = rng.normal(0.0, 3.0, 4)
        shift = rng.uniform(-50.0, 50.0)
        top_r = int(rng.integers(1, 5))

        original = predict_position(softmax(logits), line_map, top_r)
        shifted = predict_position(softmax(logits + shift), line_map, top_r)

        assert shifted.position == pytest.approx(original.position, rel=1e-12, abs=1e-12)
        assert list(shifted.selected_classes) == list(original.selected_classes)
