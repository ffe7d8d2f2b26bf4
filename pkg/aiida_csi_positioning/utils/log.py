# -*- coding: utf-8 -*-
"""Logging helpers: every logger of the package is a child of the ``aiida`` logger."""
import logging
import sys

from aiida.common.log import AIIDA_LOGGER

PACKAGE_LOGGER = AIIDA_LOGGER.getChild('csi_positioning')

LOG_FORMAT = '[%(name)s %(levelname)s] %(message)s'


def get_logger(name: str) -> logging.Logger:
    """Return the logger of a module of this package.

    Args:
        name (str): short module name, e.g. ``'nn.training'``

    Returns:
        logging.Logger: child logger of ``aiida.csi_positioning``
    """
    return PACKAGE_LOGGER.getChild(name)


def configure_stream_logging(level: int = logging.INFO, stream=None) -> logging.Logger:
    """Attach a single stream handler to the package logger.

    Calling this more than once only updates the level and the stream, so that repeated CLI invocations in one
    process do not duplicate every message.
    """
    PACKAGE_LOGGER.setLevel(level)
    for handler in PACKAGE_LOGGER.handlers:
        if getattr(handler, '_csi_positioning', False):
            handler.setStream(stream or sys.stderr)
            break
    else:
        handler = logging.StreamHandler(stream)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._csi_positioning = True  # pylint: disable=protected-access
        PACKAGE_LOGGER.addHandler(handler)
        PACKAGE_LOGGER.propagate = False
    return PACKAGE_LOGGER


#EOF
