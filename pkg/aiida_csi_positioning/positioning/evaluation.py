# -*- coding: utf-8 -*-
"""Positioning error evaluation against a trained network, and the report writers."""
import csv
import math
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy

from aiida_csi_positioning.nn.functional import EVAL, softmax
from aiida_csi_positioning.utils.log import get_logger

from .estimator import (
    DEFAULT_TOP_R, ReferenceMap, euclidean_error, euclidean_errors, predict_position, predict_positions
)

LOGGER = get_logger('positioning.evaluation')

#: R values tabulated by the sweep.
SWEEP_VALUES = tuple(range(1, 9))

_BATCH = 256


@dataclass
class ErrorReport:
    """Per-sample positioning errors grouped by test point.

    ``point_ids`` and ``sample_indices`` identify each error; ``sample_indices`` count within the test point.
    """

    point_ids: numpy.ndarray
    sample_indices: numpy.ndarray
    errors: numpy.ndarray
    latencies: numpy.ndarray
    top_r: int = DEFAULT_TOP_R
    point_names: Tuple[str, ...] = ()
    point_los: Dict[int, bool] = field(default_factory=dict)

    def __post_init__(self):
        self.errors = numpy.asarray(self.errors, dtype=numpy.float64)
        if numpy.any(self.errors < 0):
            raise ValueError('positioning errors cannot be negative')

    def __len__(self) -> int:
        return self.errors.shape[0]

    def point_name(self, point_id: int) -> str:
        if point_id < len(self.point_names):
            return self.point_names[point_id]
        return f't{point_id}'

    def per_point(self) -> Dict[int, numpy.ndarray]:
        """Errors of each test point, in ascending point id."""
        return {int(point): self.errors[self.point_ids == point] for point in numpy.unique(self.point_ids)}

    def per_point_mean(self) -> Dict[int, float]:
        return {point: float(values.mean()) for point, values in self.per_point().items()}

    @property
    def overall_mean(self) -> Optional[float]:
        """Mean over all samples, ``None`` for an empty report."""
        return float(self.errors.mean()) if len(self) else None

    @property
    def median_latency(self) -> Optional[float]:
        return float(numpy.median(self.latencies)) if len(self.latencies) else None


def _sample_indices(point_ids: numpy.ndarray) -> numpy.ndarray:
    indices = numpy.zeros(point_ids.shape[0], dtype=numpy.int64)
    counters: Dict[int, int] = {}
    for position, point in enumerate(point_ids):
        indices[position] = counters.get(int(point), 0)
        counters[int(point)] = indices[position] + 1
    return indices


def evaluate(
    network,
    test_set,
    reference_map: ReferenceMap,
    top_r: int = DEFAULT_TOP_R,
    point_names: Sequence[str] = (),
    point_los: Optional[Dict[int, bool]] = None,
) -> ErrorReport:
    """Decode every test sample on its own through an eval-mode forward pass and measure its error and latency.

    The latency of a sample covers the forward pass, the softmax and the position decoding.
    """

    n_samples = len(test_set)
    errors = numpy.zeros(n_samples)
    latencies = numpy.zeros(n_samples)
    for index in range(n_samples):
        record = test_set[index]
        start = time.perf_counter()
        probs = softmax(network.forward(record.tensor[None], EVAL))[0]
        estimate = predict_position(probs, reference_map, top_r)
        latencies[index] = time.perf_counter() - start
        errors[index] = euclidean_error(estimate, record.true_position)

    report = ErrorReport(
        point_ids=numpy.asarray(test_set.point_ids, dtype=numpy.int64),
        sample_indices=_sample_indices(numpy.asarray(test_set.point_ids)),
        errors=errors,
        latencies=latencies,
        top_r=top_r,
        point_names=tuple(point_names),
        point_los=dict(point_los or {}),
    )
    if n_samples:
        LOGGER.info(
            f'evaluated {n_samples} test samples with R={top_r}: mean error {report.overall_mean:.3f} m, '
            f'median latency {report.median_latency * 1e3:.3f} ms'
        )
    return report


def sample_probabilities(network, test_set) -> numpy.ndarray:
    """Eval-mode class probabilities of all test samples, computed in fixed chunks."""

    chunks = [
        softmax(network.forward(test_set.tensors[start:start + _BATCH], EVAL))
        for start in range(0, len(test_set), _BATCH)
    ]
    return numpy.concatenate(chunks) if chunks else numpy.zeros((0, 0))


def mean_test_error(network, test_set, reference_map: ReferenceMap, top_r: int = DEFAULT_TOP_R) -> Optional[float]:
    """Mean positioning error over the test set; ``None`` when it is empty."""
    if len(test_set) == 0:
        return None
    positions = predict_positions(sample_probabilities(network, test_set), reference_map, top_r)
    return float(euclidean_errors(positions, test_set.positions).mean())


def sweep_top_r(network, test_set, reference_map: ReferenceMap,
                values: Iterable[int] = SWEEP_VALUES) -> List[Tuple[int, float]]:
    """Mean test error for each R in ``values`` that does not exceed the number of reference points."""
    if len(test_set) == 0:
        return []
    probs = sample_probabilities(network, test_set)
    table = []
    for top_r in values:
        if top_r > len(reference_map):
            continue
        positions = predict_positions(probs, reference_map, top_r)
        table.append((top_r, float(euclidean_errors(positions, test_set.positions).mean())))
    return table


def track_min_mean_error(history: Sequence) -> Tuple[int, float]:
    """Index (0-based, earliest on ties) and value of the lowest mean error in a per-epoch history.

    Entries are :class:`ErrorReport` objects or plain mean errors; empty reports and NaN entries are skipped.

    Raises:
        ValueError: if the history holds no usable entry
    """
    best_index, best_value = None, math.inf
    for index, entry in enumerate(history):
        value = entry.overall_mean if isinstance(entry, ErrorReport) else entry
        if value is None or math.isnan(value):
            continue
        if value < best_value:
            best_index, best_value = index, float(value)
    if best_index is None:
        raise ValueError('the error history is empty')
    return best_index, best_value


def write_errors_csv(report: ErrorReport, path) -> None:
    """Rows of ``test_point_id, sample_idx, error_m``; the id is the 0-based index of the test point."""
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(('test_point_id', 'sample_idx', 'error_m'))
        for point, sample, error in zip(report.point_ids, report.sample_indices, report.errors):
            writer.writerow((int(point), int(sample), repr(float(error))))


def write_sweep_csv(table: Sequence[Tuple[int, float]], path) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(('R', 'mean_error_m'))
        for top_r, value in table:
            writer.writerow((top_r, repr(value)))


def format_summary(
    report: ErrorReport,
    min_mean: Optional[Tuple[int, float]] = None,
    best_epoch: Optional[int] = None,
    sweep: Sequence[Tuple[int, float]] = (),
) -> str:
    """Human-readable summary block: R, per-point means, overall mean, minimum-mean epoch and median latency.

    ``min_mean`` holds a 1-based epoch.
    """
    lines = [f'R = {report.top_r}']
    if best_epoch is not None:
        lines.append(f'best validation checkpoint: epoch {best_epoch}')
    lines.append('per test point mean error:')
    for point, value in report.per_point_mean().items():
        condition = ''
        if point in report.point_los:
            condition = ' (LOS)' if report.point_los[point] else ' (NLOS)'
        lines.append(f'  {report.point_name(point)}{condition}: {value:.3f} m')
    overall = report.overall_mean
    lines.append(f'overall mean error: {overall:.3f} m' if overall is not None else 'overall mean error: n/a')
    if min_mean is not None:
        lines.append(f'minimum mean error: {min_mean[1]:.3f} m at epoch {min_mean[0]}')
    latency = report.median_latency
    lines.append(f'median latency: {latency * 1e3:.3f} ms' if latency is not None else 'median latency: n/a')
    if sweep:
        lines.append('mean error per R:')
        lines.extend(f'  R = {top_r}: {value:.3f} m' for top_r, value in sweep)
    return '\n'.join(lines) + '\n'
