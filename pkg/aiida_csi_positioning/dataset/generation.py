# -*- coding: utf-8 -*-
"""Labeled reference samples, test records, stratified splitting and the assembled fingerprint dataset.

Every noise stream is derived from ``(seed, purpose, point index)`` so that reference and test samples of the same
location never share noise, and each location's stream is independent of how many other points the scene holds.
"""
import enum
from dataclasses import dataclass, field
from typing import Iterator, Optional, Tuple

import numpy

from aiida_csi_positioning.channel import BeamCodebook, LinkBudget, Scene, add_noise, beamformed_csi, trace_paths
from aiida_csi_positioning.exceptions import ShapeMismatchError
from aiida_csi_positioning.positioning.estimator import ReferenceMap
from aiida_csi_positioning.utils.log import get_logger

from .tensors import from_real_tensor, to_real_tensor

LOGGER = get_logger('dataset.generation')

TENSOR_DTYPE = numpy.float32


class Purpose(enum.IntEnum):
    """Spawn keys separating the random streams of one seed."""

    REFERENCE = 0
    TEST = 1
    SPLIT = 2


def sample_rng(seed: int, purpose: Purpose, index: int = 0) -> numpy.random.Generator:
    """Independent generator for one purpose and point index."""
    return numpy.random.default_rng(numpy.random.SeedSequence(int(seed), spawn_key=(int(purpose), int(index))))


@dataclass(frozen=True)
class LabeledSample:
    """One ``M x 2B`` tensor and the class id of the reference point it was observed at."""

    tensor: numpy.ndarray
    class_id: int


@dataclass(frozen=True)
class TestRecord:
    """One test tensor with the true location and the index of its test point; no class label."""

    __test__ = False

    tensor: numpy.ndarray
    true_position: Tuple[float, float]
    point_id: int


class SampleSet:
    """Stacked labeled tensors of shape ``(n, M, 2B)``, indexable as a sequence of :class:`LabeledSample`."""

    def __init__(self, tensors: numpy.ndarray, class_ids: numpy.ndarray) -> None:
        tensors = numpy.asarray(tensors, dtype=TENSOR_DTYPE)
        class_ids = numpy.asarray(class_ids, dtype=numpy.int64)
        if tensors.ndim != 3 or class_ids.shape != (tensors.shape[0],):
            raise ShapeMismatchError(f'inconsistent sample shapes {tensors.shape} and {class_ids.shape}')
        self.tensors = tensors
        self.class_ids = class_ids

    @classmethod
    def empty(cls, n_subcarriers: int, n_columns: int) -> 'SampleSet':
        return cls(numpy.zeros((0, n_subcarriers, n_columns), dtype=TENSOR_DTYPE), numpy.zeros(0, dtype=numpy.int64))

    def __len__(self) -> int:
        return self.tensors.shape[0]

    def __getitem__(self, index: int) -> LabeledSample:
        return LabeledSample(self.tensors[index], int(self.class_ids[index]))

    def __iter__(self) -> Iterator[LabeledSample]:
        for index in range(len(self)):
            yield self[index]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampleSet):
            return NotImplemented
        return numpy.array_equal(self.tensors, other.tensors) and numpy.array_equal(self.class_ids, other.class_ids)

    def subset(self, indices) -> 'SampleSet':
        indices = numpy.asarray(indices, dtype=numpy.int64)
        return SampleSet(self.tensors[indices], self.class_ids[indices])

    def class_counts(self, n_classes: int) -> numpy.ndarray:
        """Number of samples per class id."""
        return numpy.bincount(self.class_ids, minlength=n_classes)


class TestSet:
    """Stacked test tensors with their true positions ``(n, 2)`` and test point ids."""

    __test__ = False

    def __init__(self, tensors: numpy.ndarray, positions: numpy.ndarray, point_ids: numpy.ndarray) -> None:
        tensors = numpy.asarray(tensors, dtype=TENSOR_DTYPE)
        positions = numpy.asarray(positions, dtype=numpy.float64).reshape(-1, 2)
        point_ids = numpy.asarray(point_ids, dtype=numpy.int64)
        if tensors.ndim != 3 or positions.shape[0] != tensors.shape[0] or point_ids.shape != (tensors.shape[0],):
            raise ShapeMismatchError(
                f'inconsistent test shapes {tensors.shape}, {positions.shape} and {point_ids.shape}'
            )
        self.tensors = tensors
        self.positions = positions
        self.point_ids = point_ids

    @classmethod
    def empty(cls, n_subcarriers: int, n_columns: int) -> 'TestSet':
        return cls(
            numpy.zeros((0, n_subcarriers, n_columns), dtype=TENSOR_DTYPE), numpy.zeros((0, 2)),
            numpy.zeros(0, dtype=numpy.int64)
        )

    def __len__(self) -> int:
        return self.tensors.shape[0]

    def __getitem__(self, index: int) -> TestRecord:
        position = self.positions[index]
        return TestRecord(self.tensors[index], (float(position[0]), float(position[1])), int(self.point_ids[index]))

    def __iter__(self) -> Iterator[TestRecord]:
        for index in range(len(self)):
            yield self[index]

    def __eq__(self, other) -> bool:
        if not isinstance(other, TestSet):
            return NotImplemented
        return (
            numpy.array_equal(self.tensors, other.tensors) and numpy.array_equal(self.positions, other.positions) and
            numpy.array_equal(self.point_ids, other.point_ids)
        )


def _noisy_tensors(scene, location, codebook, budget, count, rng) -> numpy.ndarray:
    pathset = trace_paths(scene, location)
    csi = beamformed_csi(scene, pathset, codebook)
    noisy = add_noise(numpy.broadcast_to(csi, (count,) + csi.shape), budget, rng)
    return to_real_tensor(noisy, dtype=TENSOR_DTYPE)


def generate_reference_set(
    scene: Scene, samples_per_point: int, budget: LinkBudget, seed: int, codebook: BeamCodebook
) -> SampleSet:
    """Draw ``samples_per_point`` noisy tensors at every reference point, labeled by the point index.

    Raises:
        ValueError: if the scene has no reference points or the count is negative
        BlockedLocationError: if a reference point lies inside a building
    """
    if not scene.reference_points:
        raise ValueError('the scene has no reference points')
    if samples_per_point < 0:
        raise ValueError(f'samples per point must be non-negative, got {samples_per_point}')

    tensors, labels = [], []
    for class_id, location in enumerate(scene.reference_points):
        rng = sample_rng(seed, Purpose.REFERENCE, class_id)
        tensors.append(_noisy_tensors(scene, location, codebook, budget, samples_per_point, rng))
        labels.append(numpy.full(samples_per_point, class_id, dtype=numpy.int64))

    LOGGER.info(f'generated {samples_per_point} samples at each of {len(scene.reference_points)} reference points')
    return SampleSet(numpy.concatenate(tensors), numpy.concatenate(labels))


def generate_test_set(
    scene: Scene, samples_per_point: int, budget: LinkBudget, seed: int, codebook: BeamCodebook
) -> TestSet:
    """Draw ``samples_per_point`` noisy tensors at every test point, carrying the true coordinates."""
    if samples_per_point < 0:
        raise ValueError(f'samples per point must be non-negative, got {samples_per_point}')
    n_columns = 2 * codebook.n_beams
    if not scene.test_points or samples_per_point == 0:
        return TestSet.empty(scene.n_subcarriers, n_columns)

    tensors, positions, point_ids = [], [], []
    for point_id, location in enumerate(scene.test_points):
        rng = sample_rng(seed, Purpose.TEST, point_id)
        tensors.append(_noisy_tensors(scene, location, codebook, budget, samples_per_point, rng))
        positions.append(numpy.tile(numpy.asarray(location, dtype=float), (samples_per_point, 1)))
        point_ids.append(numpy.full(samples_per_point, point_id, dtype=numpy.int64))

    LOGGER.info(f'generated {samples_per_point} samples at each of {len(scene.test_points)} test points')
    return TestSet(numpy.concatenate(tensors), numpy.concatenate(positions), numpy.concatenate(point_ids))


def stratum_size(train_fraction: float, count: int) -> int:
    """Training share of a class of ``count`` samples: rounded half up, kept within ``[1, count - 1]``."""
    return min(max(int(numpy.floor(train_fraction * count + 0.5)), 1), count - 1)


def split(samples: SampleSet, train_fraction: float, seed: int) -> Tuple[SampleSet, SampleSet]:
    """Shuffle and partition per class so each class keeps ``train_fraction`` of its samples within one sample.

    Both parts keep the shuffled order.

    Raises:
        ValueError: if the fraction is outside ``(0, 1)`` or a class has fewer than two samples
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f'train fraction must lie in (0, 1), got {train_fraction}')

    order = sample_rng(seed, Purpose.SPLIT).permutation(len(samples))
    shuffled_labels = samples.class_ids[order]
    in_train = numpy.zeros(len(samples), dtype=bool)

    for class_id in numpy.unique(shuffled_labels):
        positions = numpy.flatnonzero(shuffled_labels == class_id)
        if positions.size < 2:
            raise ValueError(f'class {class_id} has {positions.size} sample, at least two are needed to split')
        in_train[positions[:stratum_size(train_fraction, positions.size)]] = True

    return samples.subset(order[in_train]), samples.subset(order[~in_train])


def sample_snrs(tensors: numpy.ndarray, noise_power: float) -> numpy.ndarray:
    """Best-beam SNR in dB of each tensor in an ``(n, M, 2B)`` stack."""
    csi = from_real_tensor(numpy.asarray(tensors, dtype=numpy.float64))
    energy = numpy.max(numpy.sum(numpy.abs(csi)**2, axis=1), axis=1)
    with numpy.errstate(divide='ignore'):
        return 10.0 * numpy.log10(energy / (csi.shape[1] * noise_power))


@dataclass
class FingerprintDataset:
    """Train/validation reference samples, test records, the reference map and the provenance of the data."""

    train: SampleSet
    validation: SampleSet
    test: TestSet
    reference_map: ReferenceMap
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        shapes = {part.tensors.shape[1:] for part in (self.train, self.validation, self.test)}
        if len(shapes) != 1:
            raise ShapeMismatchError(f'dataset parts have different tensor shapes: {sorted(shapes)}')
        for part in (self.train, self.validation):
            if len(part) and int(part.class_ids.max()) >= len(self.reference_map):
                raise ShapeMismatchError('a class id has no entry in the reference map')

    @property
    def n_subcarriers(self) -> int:
        return self.train.tensors.shape[1]

    @property
    def n_beams(self) -> int:
        return self.train.tensors.shape[2] // 2

    @property
    def n_classes(self) -> int:
        return len(self.reference_map)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FingerprintDataset):
            return NotImplemented
        return (
            self.train == other.train and self.validation == other.validation and self.test == other.test and
            self.reference_map == other.reference_map and self.provenance == other.provenance
        )


def build_dataset(
    scene: Scene,
    codebook: BeamCodebook,
    budget: LinkBudget,
    samples_per_point: int,
    test_samples_per_point: int,
    train_fraction: float,
    seed: int,
    split_seed: Optional[int] = None,
    provenance: Optional[dict] = None,
) -> FingerprintDataset:
    """Generate, split and assemble the full dataset; a pure function of its arguments."""
    reference = generate_reference_set(scene, samples_per_point, budget, seed, codebook)
    train, validation = split(reference, train_fraction, seed if split_seed is None else split_seed)
    test = generate_test_set(scene, test_samples_per_point, budget, seed, codebook)
    return FingerprintDataset(
        train=train,
        validation=validation,
        test=test,
        reference_map=ReferenceMap.from_points(scene.reference_points),
        provenance=dict(provenance or {}),
    )
