# -*- coding: utf-8 -*-
"""Sectioned little-endian binary container used by the dataset and checkpoint files.

Byte layout (all integers little-endian)::

    magic        8 bytes
    version      uint16
    n_sections   uint16
    n_sections x:
        tag      4 bytes ASCII
        length   uint64, payload size in bytes
        payload  ``length`` bytes
        crc32    uint32 of the payload (zlib)

Arrays inside payloads are packed by :func:`pack_array` as ``dtype string length (uint8) | dtype string | ndim (uint8)
| shape (ndim x uint64) | raw little-endian data``.
"""
import json
import struct
import zlib
from collections import OrderedDict
from typing import Dict, Iterable, Tuple

import numpy

from aiida_csi_positioning.exceptions import ChecksumError, DataFileError, FormatVersionError, TruncatedFileError

_FILE_HEADER = struct.Struct('<8sHH')
_SECTION_HEADER = struct.Struct('<4sQ')
_CRC = struct.Struct('<I')


class SectionWriter:
    """Accumulates named sections and serializes them into one container."""

    def __init__(self, magic: bytes, version: int) -> None:
        if len(magic) != 8:
            raise ValueError('magic must be exactly 8 bytes')
        self._magic = magic
        self._version = version
        self._sections = []

    def add(self, tag: str, payload: bytes) -> None:
        """Append a section.

        Args:
            tag (str): four ASCII characters naming the section
            payload (bytes): section content
        """
        encoded = tag.encode('ascii')
        if len(encoded) != 4:
            raise ValueError(f'section tag must be 4 ASCII characters, got {tag!r}')
        self._sections.append((encoded, bytes(payload)))

    def to_bytes(self) -> bytes:
        """Return the serialized container."""
        chunks = [_FILE_HEADER.pack(self._magic, self._version, len(self._sections))]
        for tag, payload in self._sections:
            chunks.append(_SECTION_HEADER.pack(tag, len(payload)))
            chunks.append(payload)
            chunks.append(_CRC.pack(zlib.crc32(payload) & 0xFFFFFFFF))
        return b''.join(chunks)

    def write(self, path) -> None:
        """Serialize the container into ``path``."""
        with open(path, 'wb') as handle:
            handle.write(self.to_bytes())


def read_sections(data: bytes, magic: bytes, versions: Iterable[int]) -> Tuple[int, Dict[str, bytes]]:
    """Parse a container and validate every section checksum.

    Args:
        data (bytes): full file content
        magic (bytes): expected magic
        versions: supported format versions

    Returns:
        tuple: format version and an ordered mapping of section tag to payload

    Raises:
        TruncatedFileError: the content ends before a declared header or payload
        FormatVersionError: wrong magic or unsupported version
        ChecksumError: a section payload does not match its stored crc32
    """
    if len(data) < _FILE_HEADER.size:
        raise TruncatedFileError(f'file is {len(data)} bytes long, shorter than the {_FILE_HEADER.size} byte header')

    found_magic, version, n_sections = _FILE_HEADER.unpack_from(data, 0)
    if found_magic != magic:
        raise FormatVersionError(f'unexpected magic {found_magic!r}, expected {magic!r}')
    if version not in set(versions):
        raise FormatVersionError(f'unsupported format version {version}')

    offset = _FILE_HEADER.size
    sections = OrderedDict()
    for index in range(n_sections):
        if offset + _SECTION_HEADER.size > len(data):
            raise TruncatedFileError(f'file ends inside the header of section {index}')
        tag, length = _SECTION_HEADER.unpack_from(data, offset)
        offset += _SECTION_HEADER.size
        end = offset + length
        if end + _CRC.size > len(data):
            raise TruncatedFileError(f'file ends inside section {tag!r}: {length} payload bytes declared')
        payload = data[offset:end]
        (stored,) = _CRC.unpack_from(data, end)
        if zlib.crc32(payload) & 0xFFFFFFFF != stored:
            raise ChecksumError(f'checksum mismatch in section {tag!r}')
        sections[tag.decode('ascii')] = payload
        offset = end + _CRC.size

    if offset != len(data):
        raise DataFileError(f'{len(data) - offset} unexpected trailing bytes after the last section')

    return version, sections


def read_file(path, magic: bytes, versions: Iterable[int]) -> Tuple[int, Dict[str, bytes]]:
    """Read ``path`` and parse it with :func:`read_sections`."""
    with open(path, 'rb') as handle:
        return read_sections(handle.read(), magic, versions)


def pack_array(array: numpy.ndarray, dtype: str) -> bytes:
    """Pack an array with its shape, converted to the little-endian ``dtype`` (e.g. ``'<f4'``)."""
    converted = numpy.ascontiguousarray(array, dtype=numpy.dtype(dtype))
    dtype_code = converted.dtype.str.encode('ascii')
    header = struct.pack('<B', len(dtype_code)) + dtype_code + struct.pack('<B', converted.ndim)
    header += struct.pack(f'<{converted.ndim}Q', *converted.shape)
    return header + converted.tobytes(order='C')


def unpack_array(buffer: bytes, offset: int = 0) -> Tuple[numpy.ndarray, int]:
    """Unpack an array written by :func:`pack_array`.

    Returns:
        tuple: the array (a writable copy) and the offset just past it
    """
    try:
        (code_length,) = struct.unpack_from('<B', buffer, offset)
        offset += 1
        dtype = numpy.dtype(buffer[offset:offset + code_length].decode('ascii'))
        offset += code_length
        (ndim,) = struct.unpack_from('<B', buffer, offset)
        offset += 1
        shape = struct.unpack_from(f'<{ndim}Q', buffer, offset)
        offset += 8 * ndim
    except (struct.error, UnicodeDecodeError, TypeError) as exception:
        raise DataFileError(f'malformed array header: {exception}')

    count = int(numpy.prod(shape, dtype=numpy.int64))
    size = count * dtype.itemsize
    if offset + size > len(buffer):
        raise TruncatedFileError('array data extends beyond the end of its section')
    if count == 0:
        return numpy.zeros(shape, dtype=dtype), offset
    array = numpy.frombuffer(buffer, dtype=dtype, count=count, offset=offset).reshape(shape).copy()
    return array, offset + size


def pack_json(content) -> bytes:
    """Deterministic JSON encoding (sorted keys, no whitespace) for metadata sections."""
    return json.dumps(content, sort_keys=True, separators=(',', ':')).encode('utf-8')


def unpack_json(payload: bytes):
    """Decode a section written by :func:`pack_json`."""
    try:
        return json.loads(payload.decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as exception:
        raise DataFileError(f'malformed metadata section: {exception}')


#EOF
