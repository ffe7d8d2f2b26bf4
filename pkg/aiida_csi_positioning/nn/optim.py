# -*- coding: utf-8 -*-
"""AdamW with decoupled weight decay."""
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict

import numpy

from aiida_csi_positioning.exceptions import ShapeMismatchError


@dataclass
class AdamWState:
    """Moments per parameter name, the step counter and the hyperparameters."""

    lr: float = 1e-6
    weight_decay: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, numpy.ndarray] = field(default_factory=OrderedDict)
    v: Dict[str, numpy.ndarray] = field(default_factory=OrderedDict)

    @classmethod
    def create(cls, params: Dict[str, numpy.ndarray], **hyperparameters) -> 'AdamWState':
        """Zero moments matching ``params``."""
        state = cls(**hyperparameters)
        for name, value in params.items():
            state.m[name] = numpy.zeros_like(value, dtype=numpy.float64)
            state.v[name] = numpy.zeros_like(value, dtype=numpy.float64)
        return state

    def hyperparameters(self) -> dict:
        return {
            'lr': self.lr,
            'weight_decay': self.weight_decay,
            'beta1': self.beta1,
            'beta2': self.beta2,
            'eps': self.eps,
        }


def adamw_step(params: Dict[str, numpy.ndarray], grads: Dict[str, numpy.ndarray], state: AdamWState):
    """Apply one update in place: ``theta <- theta (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)``.

    Returns:
        tuple: the (updated) parameters and state
    """
    if set(params) != set(grads) or set(params) != set(state.m):
        raise ShapeMismatchError('parameters, gradients and optimizer moments name different tensors')

    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    decay = 1.0 - state.lr * state.weight_decay

    for name, param in params.items():
        grad = grads[name]
        if grad.shape != param.shape or state.m[name].shape != param.shape:
            raise ShapeMismatchError(f'{name}: gradient {grad.shape} or moment does not match parameter {param.shape}')
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        m_hat = m / correction1
        v_hat = v / correction2
        param *= decay
        param -= state.lr * m_hat / (numpy.sqrt(v_hat) + state.eps)

    return params, state
