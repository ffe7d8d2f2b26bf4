# -*- coding: utf-8 -*-
"""Online phase: decoding class probabilities into positions and evaluating positioning errors."""
from .estimator import (
    DEFAULT_TOP_R, PositionEstimate, ReferenceMap, euclidean_error, euclidean_errors, predict_position,
    predict_positions
)

__all__ = (
    'DEFAULT_TOP_R', 'PositionEstimate', 'ReferenceMap', 'euclidean_error', 'euclidean_errors', 'predict_position',
    'predict_positions'
)
