# -*- coding: utf-8 -*-
"""Tests for the AdamW update"""
import numpy
import pytest

from aiida_csi_positioning.exceptions import ShapeMismatchError
from aiida_csi_positioning.nn import AdamWState, adamw_step


def test_first_step_closed_form():
    """Bias correction makes the first step ``lr * sign(g)`` up to eps, after the decoupled decay"""
    params = {'w': numpy.array([1.0, -2.0, 3.0])}
    grads = {'w': numpy.array([0.5, -4.0, 0.0])}
    state = AdamWState.create(params, lr=0.1, weight_decay=0.01)

    adamw_step(params, grads, state)

    decayed = numpy.array([1.0, -2.0, 3.0]) * (1.0 - 0.1 * 0.01)
    expected = decayed - 0.1 * grads['w'] / (numpy.abs(grads['w']) + 1e-8)
    assert params['w'] == pytest.approx(expected, abs=1e-12)
    assert state.step == 1


def test_two_steps_match_the_recurrence():
    rng = numpy.random.default_rng(0)
    theta = rng.standard_normal(5)
    params = {'w': theta.copy()}
    state = AdamWState.create(params, lr=1e-3, weight_decay=1e-2, beta1=0.8, beta2=0.99, eps=1e-6)

    m, v = numpy.zeros(5), numpy.zeros(5)
    for step in (1, 2):
        grad = rng.standard_normal(5)
        adamw_step(params, {'w': grad}, state)
        m = 0.8 * m + 0.2 * grad
        v = 0.99 * v + 0.01 * grad**2
        theta = theta * (1 - 1e-5) - 1e-3 * (m / (1 - 0.8**step)) / (numpy.sqrt(v / (1 - 0.99**step)) + 1e-6)

    assert params['w'] == pytest.approx(theta, abs=1e-14)


def test_decay_acts_without_gradient():
    params = {'w': numpy.full(3, 2.0)}
    state = AdamWState.create(params, lr=0.5, weight_decay=0.1)
    adamw_step(params, {'w': numpy.zeros(3)}, state)
    assert params['w'] == pytest.approx(numpy.full(3, 2.0 * 0.95))


def test_mismatched_names_and_shapes():
    params = {'w': numpy.zeros(2)}
    state = AdamWState.create(params)
    with pytest.raises(ShapeMismatchError):
        adamw_step(params, {'v': numpy.zeros(2)}, state)
    with pytest.raises(ShapeMismatchError):
        adamw_step(params, {'w': numpy.zeros(3)}, state)


def test_without_decay_it_is_plain_adam():
    """With zero weight decay the update is textbook Adam on a quadratic loss"""
    rng = numpy.random.default_rng(4)
    target = rng.standard_normal(6)
    params = {'w': rng.standard_normal(6)}
    theta = params['w'].copy()
    state = AdamWState.create(params, lr=1e-2, weight_decay=0.0)

    m, v = numpy.zeros(6), numpy.zeros(6)
    for step in range(1, 21):
        adamw_step(params, {'w': params['w'] - target}, state)
        grad = theta - target
        m = 0.9 * m + 0.1 * grad
        v = 0.999 * v + 0.001 * grad * grad
        theta = theta - 1e-2 * (m / (1 - 0.9**step)) / (numpy.sqrt(v / (1 - 0.999**step)) + 1e-8)

    assert params['w'] == pytest.approx(theta, abs=1e-12)


def test_decay_shrinks_the_parameters():
    rng = numpy.random.default_rng(8)
    start = 10.0 * rng.standard_normal(20)
    grads = rng.standard_normal((50, 20))
    norms = {}

    for weight_decay in (0.0, 1.0):
        params = {'w': start.copy()}
        state = AdamWState.create(params, lr=1e-2, weight_decay=weight_decay)
        for grad in grads:
            adamw_step(params, {'w': grad}, state)
        norms[weight_decay] = numpy.linalg.norm(params['w'])

    assert norms[1.0] < norms[0.0]
