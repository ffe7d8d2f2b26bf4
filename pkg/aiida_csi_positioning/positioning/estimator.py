# -*- coding: utf-8 -*-
"""Top-R weighted centroid decoding of class probabilities into continuous positions."""
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy

from aiida_csi_positioning.exceptions import NonFiniteError, ShapeMismatchError

#: Number of reference points averaged by default.
DEFAULT_TOP_R = 4


class ReferenceMap:
    """Coordinates of the reference points indexed by class id ``0 .. N-1``."""

    def __init__(self, coordinates) -> None:
        coordinates = numpy.array(coordinates, dtype=numpy.float64).reshape(-1, 2)
        if not numpy.all(numpy.isfinite(coordinates)):
            raise NonFiniteError('reference coordinates must be finite')
        coordinates.setflags(write=False)
        self.coordinates = coordinates

    @classmethod
    def from_points(cls, points: Sequence[Tuple[float, float]]) -> 'ReferenceMap':
        return cls(numpy.asarray(points, dtype=numpy.float64).reshape(-1, 2))

    @classmethod
    def from_entries(cls, entries: Sequence[Tuple[int, float, float]]) -> 'ReferenceMap':
        """Build from ``(class_id, x, y)`` triples; the ids must be exactly ``0 .. N-1``."""
        entries = sorted(entries)
        if [entry[0] for entry in entries] != list(range(len(entries))):
            raise ShapeMismatchError('reference map class ids must be contiguous from 0')
        return cls([(x, y) for _, x, y in entries])

    def entries(self) -> List[Tuple[int, float, float]]:
        return [(class_id, float(x), float(y)) for class_id, (x, y) in enumerate(self.coordinates)]

    def position(self, class_id: int) -> Tuple[float, float]:
        x, y = self.coordinates[class_id]
        return float(x), float(y)

    def __len__(self) -> int:
        return self.coordinates.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReferenceMap):
            return NotImplemented
        return numpy.array_equal(self.coordinates, other.coordinates)

    def __repr__(self) -> str:
        return f'ReferenceMap({len(self)} points)'


@dataclass(frozen=True)
class PositionEstimate:
    """Estimated position and the reference points (with renormalized weights) it was averaged from."""

    x: float
    y: float
    selected_classes: Tuple[int, ...]
    selected_weights: Tuple[float, ...]

    @property
    def position(self) -> Tuple[float, float]:
        return (self.x, self.y)


def _check_top_r(top_r: int, n_classes: int) -> None:
    if not 1 <= top_r <= n_classes:
        raise ValueError(f'R must lie in [1, {n_classes}], got {top_r}')


def _check_probabilities(probs: numpy.ndarray, n_classes: int) -> None:
    if probs.shape[-1] != n_classes:
        raise ShapeMismatchError(f'{probs.shape[-1]} probabilities for {n_classes} reference points')
    if not numpy.all(numpy.isfinite(probs)):
        raise NonFiniteError('probabilities must be finite')
    if numpy.any(probs < 0):
        raise ValueError('probabilities must be non-negative')


def predict_position(probs, reference_map: ReferenceMap, top_r: int = DEFAULT_TOP_R) -> PositionEstimate:
    """Weighted centroid of the ``top_r`` most probable reference points.

    Ties in probability select the lower class id first. The selected probabilities are renormalized to sum to one.

    Raises:
        ValueError: if ``top_r`` is outside ``[1, N]`` or the selected probabilities are all zero
    """
    probs = numpy.asarray(probs, dtype=numpy.float64)
    _check_top_r(top_r, len(reference_map))
    _check_probabilities(probs, len(reference_map))

    selected = numpy.argsort(-probs, kind='stable')[:top_r]
    total = probs[selected].sum()
    if not total > 0:
        raise ValueError('the selected probabilities sum to zero')
    weights = probs[selected] / total
    x, y = weights @ reference_map.coordinates[selected]

    return PositionEstimate(
        x=float(x),
        y=float(y),
        selected_classes=tuple(int(index) for index in selected),
        selected_weights=tuple(float(weight) for weight in weights),
    )


def predict_positions(probs, reference_map: ReferenceMap, top_r: int = DEFAULT_TOP_R) -> numpy.ndarray:
    """:func:`predict_position` for every row of an ``(n, N)`` probability matrix, returning ``(n, 2)``."""
    probs = numpy.asarray(probs, dtype=numpy.float64)
    if probs.ndim != 2:
        raise ShapeMismatchError(f'expected an (n, N) probability matrix, got shape {probs.shape}')
    _check_top_r(top_r, len(reference_map))
    _check_probabilities(probs, len(reference_map))
    if probs.shape[0] == 0:
        return numpy.zeros((0, 2))

    selected = numpy.argsort(-probs, axis=1, kind='stable')[:, :top_r]
    chosen = numpy.take_along_axis(probs, selected, axis=1)
    totals = chosen.sum(axis=1, keepdims=True)
    if not numpy.all(totals > 0):
        raise ValueError('the selected probabilities sum to zero')
    weights = chosen / totals
    return numpy.einsum('nr,nrd->nd', weights, reference_map.coordinates[selected])


def euclidean_error(estimate: PositionEstimate, truth: Tuple[float, float]) -> float:
    """Distance in meters between an estimate and the true position."""
    return math.hypot(estimate.x - truth[0], estimate.y - truth[1])


def euclidean_errors(positions, truths) -> numpy.ndarray:
    """Row-wise distances between two ``(n, 2)`` arrays."""
    difference = numpy.asarray(positions, dtype=numpy.float64) - numpy.asarray(truths, dtype=numpy.float64)
    return numpy.hypot(difference[:, 0], difference[:, 1])
