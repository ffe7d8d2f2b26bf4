# -*- coding: utf-8 -*-
"""Input generator and reader for the INI-style files of the csi-positioning pipeline"""

import configparser
from copy import deepcopy
from typing import Dict, Optional, Tuple

from aiida_csi_positioning.exceptions import RunConfigError

Sections = Dict[str, Dict[str, str]]


class FingerprintInput:
    """Transforms a dictionary of sections into a run configuration or scene file"""

    def __init__(self, params: dict, header: Optional[str] = None) -> None:
        """Initializing FingerprintInput object

        Args:
            params (dict): mapping of section name to a mapping of key to value
            header (str): optional comment lines written above the first section
        """

        self._params = deepcopy(params)
        self._header = header

    def render(self) -> str:
        """Render input string

        Returns:
            str: The content of the input file.
        """
        output = ['### Generated by aiida-csi-positioning ###']
        if self._header:
            output.extend(f'# {line}' if line else '#' for line in self._header.splitlines())
        self._render_input(output, deepcopy(self._params))
        return '\n'.join(output) + '\n'

    @staticmethod
    def _render_input(output: list, params: dict) -> None:
        """Rendering the sections in their given order, keys in their given order

        Args:
            output (list): Initialized list of lines
            params (dict): Input parameters
        """
        for section, entries in params.items():
            output.append('')
            output.append(f'[{section}]')
            for key, value in entries.items():
                if value is None:
                    continue
                output.append(f'{key} = {format_value(value)}')


def format_value(value) -> str:
    """Format a value so that :func:`parse_input` and the typed readers restore it exactly."""
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ', '.join(format_value(item) for item in value)
    return str(value)


def parse_input(text: str) -> Sections:
    """Parse the content of a configuration file into ordered sections of raw string values.

    Raises:
        RunConfigError: on syntax errors or duplicate keys
    """
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=('#',), strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exception:
        raise RunConfigError(f'invalid configuration file: {exception}')
    return {section: dict(parser.items(section)) for section in parser.sections()}


def read_input(path) -> Sections:
    """Read and parse the configuration file at ``path``."""
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            return parse_input(handle.read())
    except OSError as exception:
        raise RunConfigError(f'cannot read configuration file {path}: {exception}')


def parse_floats(value: str, count: Optional[int] = None, key: str = 'value') -> Tuple[float, ...]:
    """Parse a comma separated list of floats, optionally checking its length."""
    try:
        numbers = tuple(float(item) for item in value.split(',') if item.strip())
    except ValueError:
        raise RunConfigError(f'{key}: expected comma separated numbers, got {value!r}')
    if count is not None and len(numbers) != count:
        raise RunConfigError(f'{key}: expected {count} numbers, got {len(numbers)}')
    return numbers


def parse_ints(value: str, count: Optional[int] = None, key: str = 'value') -> Tuple[int, ...]:
    """Parse a comma separated list of integers, optionally checking its length."""
    try:
        numbers = tuple(int(item) for item in value.split(',') if item.strip())
    except ValueError:
        raise RunConfigError(f'{key}: expected comma separated integers, got {value!r}')
    if count is not None and len(numbers) != count:
        raise RunConfigError(f'{key}: expected {count} integers, got {len(numbers)}')
    return numbers


def parse_bool(value: str, key: str = 'value') -> bool:
    """Parse ``true``/``false`` style flags."""
    lowered = value.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise RunConfigError(f'{key}: expected a boolean, got {value!r}')
