# -*- coding: utf-8 -*-
"""Versioned binary dataset file.

The file is a sectioned container (see :mod:`aiida_csi_positioning.utils.binary`) with magic ``CSIFPDAT`` and the
sections below, in this order. Integers are little-endian ``uint32``, tensors ``float32``, positions ``float64``::

    HEAD  M, B, n_classes, n_train, n_validation, n_test      (6 x uint32)
    PROV  provenance, JSON
    REFM  count (uint32), then count x (class_id uint32, x float64, y float64)
    TRNX  train tensors        (n_train, M, 2B) float32
    TRNY  train class ids      (n_train,) uint32
    VALX  validation tensors   (n_validation, M, 2B) float32
    VALY  validation class ids (n_validation,) uint32
    TSTX  test tensors         (n_test, M, 2B) float32
    TSTP  test true positions  (n_test, 2) float64
    TSTI  test point ids       (n_test,) uint32
"""
import struct

from aiida_csi_positioning.exceptions import DataFileError
from aiida_csi_positioning.positioning.estimator import ReferenceMap
from aiida_csi_positioning.utils.binary import (
    SectionWriter, pack_array, pack_json, read_file, unpack_array, unpack_json
)
from aiida_csi_positioning.utils.log import get_logger

from .generation import FingerprintDataset, SampleSet, TestSet

LOGGER = get_logger('dataset.storage')

DATASET_MAGIC = b'CSIFPDAT'
DATASET_VERSION = 1
SUPPORTED_VERSIONS = (1,)

_HEAD = struct.Struct('<IIIIII')
_REFM_COUNT = struct.Struct('<I')
_REFM_ENTRY = struct.Struct('<Idd')

_SECTIONS = ('HEAD', 'PROV', 'REFM', 'TRNX', 'TRNY', 'VALX', 'VALY', 'TSTX', 'TSTP', 'TSTI')


def _pack_reference_map(reference_map: ReferenceMap) -> bytes:
    chunks = [_REFM_COUNT.pack(len(reference_map))]
    chunks.extend(_REFM_ENTRY.pack(*entry) for entry in reference_map.entries())
    return b''.join(chunks)


def _unpack_reference_map(payload: bytes) -> ReferenceMap:
    try:
        (count,) = _REFM_COUNT.unpack_from(payload, 0)
        if len(payload) != _REFM_COUNT.size + count * _REFM_ENTRY.size:
            raise DataFileError(f'reference map section has {len(payload)} bytes for {count} entries')
        entries = [
            _REFM_ENTRY.unpack_from(payload, _REFM_COUNT.size + index * _REFM_ENTRY.size) for index in range(count)
        ]
    except struct.error as exception:
        raise DataFileError(f'malformed reference map: {exception}')
    return ReferenceMap.from_entries(entries)


def _unpack_single(payload: bytes, tag: str):
    array, offset = unpack_array(payload)
    if offset != len(payload):
        raise DataFileError(f'section {tag} has {len(payload) - offset} trailing bytes')
    return array


def dataset_to_bytes(dataset: FingerprintDataset) -> bytes:
    """Serialize ``dataset``; equal datasets give identical bytes."""
    writer = SectionWriter(DATASET_MAGIC, DATASET_VERSION)
    writer.add(
        'HEAD',
        _HEAD.pack(
            dataset.n_subcarriers, dataset.n_beams, dataset.n_classes, len(dataset.train), len(dataset.validation),
            len(dataset.test)
        )
    )
    writer.add('PROV', pack_json(dataset.provenance))
    writer.add('REFM', _pack_reference_map(dataset.reference_map))
    writer.add('TRNX', pack_array(dataset.train.tensors, '<f4'))
    writer.add('TRNY', pack_array(dataset.train.class_ids, '<u4'))
    writer.add('VALX', pack_array(dataset.validation.tensors, '<f4'))
    writer.add('VALY', pack_array(dataset.validation.class_ids, '<u4'))
    writer.add('TSTX', pack_array(dataset.test.tensors, '<f4'))
    writer.add('TSTP', pack_array(dataset.test.positions, '<f8'))
    writer.add('TSTI', pack_array(dataset.test.point_ids, '<u4'))
    return writer.to_bytes()


def save_dataset(dataset: FingerprintDataset, path) -> None:
    """Write ``dataset`` to ``path``."""
    with open(path, 'wb') as handle:
        handle.write(dataset_to_bytes(dataset))
    LOGGER.info(
        f'saved dataset with {len(dataset.train)} train, {len(dataset.validation)} validation and '
        f'{len(dataset.test)} test samples to {path}'
    )


def load_dataset(path) -> FingerprintDataset:
    """Read a dataset file.

    Raises:
        FormatVersionError: wrong magic or unsupported version
        TruncatedFileError: the file ends early
        ChecksumError: a section is corrupted
        DataFileError: sections are missing or inconsistent with the header
    """
    _, sections = read_file(path, DATASET_MAGIC, SUPPORTED_VERSIONS)
    missing = [tag for tag in _SECTIONS if tag not in sections]
    if missing:
        raise DataFileError(f'dataset file lacks sections {", ".join(missing)}')

    try:
        n_subcarriers, n_beams, n_classes, n_train, n_validation, n_test = _HEAD.unpack(sections['HEAD'])
    except struct.error as exception:
        raise DataFileError(f'malformed dataset header: {exception}')

    arrays = {tag: _unpack_single(sections[tag], tag) for tag in _SECTIONS[3:]}
    expected = {
        'TRNX': (n_train, n_subcarriers, 2 * n_beams),
        'TRNY': (n_train,),
        'VALX': (n_validation, n_subcarriers, 2 * n_beams),
        'VALY': (n_validation,),
        'TSTX': (n_test, n_subcarriers, 2 * n_beams),
        'TSTP': (n_test, 2),
        'TSTI': (n_test,),
    }
    for tag, shape in expected.items():
        if arrays[tag].shape != shape:
            raise DataFileError(f'section {tag} has shape {arrays[tag].shape}, header declares {shape}')

    reference_map = _unpack_reference_map(sections['REFM'])
    if len(reference_map) != n_classes:
        raise DataFileError(f'reference map has {len(reference_map)} entries, header declares {n_classes}')

    return FingerprintDataset(
        train=SampleSet(arrays['TRNX'], arrays['TRNY']),
        validation=SampleSet(arrays['VALX'], arrays['VALY']),
        test=TestSet(arrays['TSTX'], arrays['TSTP'], arrays['TSTI']),
        reference_map=reference_map,
        provenance=unpack_json(sections['PROV']),
    )


def load_dataset_provenance(path) -> dict:
    """Provenance record of a dataset file, without decoding its arrays."""
    _, sections = read_file(path, DATASET_MAGIC, SUPPORTED_VERSIONS)
    if 'PROV' not in sections:
        raise DataFileError('dataset file lacks section PROV')
    return unpack_json(sections['PROV'])
