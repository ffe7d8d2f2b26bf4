# -*- coding: utf-8 -*-
"""Exceptions raised by the aiida-csi-positioning toolkit.

All of them derive from the ``aiida.common.exceptions`` hierarchy so that callers running inside AiiDA processes can
handle them the same way as core exceptions.
"""
from aiida.common.exceptions import AiidaException, ConfigurationError, ValidationError

__all__ = (
    'SceneGeometryError', 'BlockedLocationError', 'ShapeMismatchError', 'NonFiniteError', 'DataFileError',
    'FormatVersionError', 'TruncatedFileError', 'ChecksumError', 'TrainingDivergedError', 'VerificationError',
    'RunConfigError'
)


class SceneGeometryError(ValidationError):
    """Raised when a scene or a location in it is geometrically invalid."""


class BlockedLocationError(SceneGeometryError):
    """Raised when a location lies inside a building footprint or a required line of sight is blocked."""


class ShapeMismatchError(ValidationError):
    """Raised when array, tensor or parameter dimensions disagree."""


class NonFiniteError(ValidationError):
    """Raised when an input that must be finite contains NaN or infinite values."""


class DataFileError(AiidaException):
    """Base class for problems with dataset and checkpoint files."""


class FormatVersionError(DataFileError):
    """Raised when a file has an unknown magic or an unsupported format version."""


class TruncatedFileError(DataFileError):
    """Raised when a file ends before all declared sections have been read."""


class ChecksumError(DataFileError):
    """Raised when the stored checksum of a section does not match its payload."""


class TrainingDivergedError(AiidaException):
    """Raised when the training loss becomes non-finite.

    :param message: human readable description
    :param epoch: epoch in which the divergence was detected
    :param batch: index of the minibatch within the epoch
    :param dump: optional path of the state dump written before raising
    """

    def __init__(self, message: str, epoch: int, batch: int, dump=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch
        self.dump = dump


class VerificationError(AiidaException):
    """Raised when the provenance hash chain of the run artifacts is broken."""


class RunConfigError(ConfigurationError):
    """Raised for invalid or incomplete run configurations."""


#EOF
