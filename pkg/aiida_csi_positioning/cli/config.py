# -*- coding: utf-8 -*-
"""The run configuration: one INI-style file driving every pipeline stage.

Sections besides the scene sections (see :mod:`aiida_csi_positioning.channel.scene_file`)::

    [run]          output_dir; scene_file (optional scene to use instead of the inline scene sections)
    [beams]        n_azimuth; n_elevation; target_snr_db; calibration_distance
    [dataset]      samples_per_point; test_samples_per_point; train_fraction; split_seed
    [network]      conv_channels; conv_kernels; conv_strides; conv_paddings; pool_windows; pool_strides;
                   bn_eps; bn_momentum; init_seed
    [training]     epochs; batch_size; learning_rate; weight_decay; beta1; beta2; epsilon; shuffle_seed;
                   track_test_error
    [positioning]  top_r; sweep

The network input shape and class count are not configurable: they follow from the dataset.
"""
import os
from copy import deepcopy
from typing import Dict, Iterable

from aiida_csi_positioning.channel import read_scene, scene_from_sections, scene_to_sections
from aiida_csi_positioning.exceptions import RunConfigError, ShapeMismatchError
from aiida_csi_positioning.nn import NetworkConfig, TrainConfig, flatten_length
from aiida_csi_positioning.positioning import DEFAULT_TOP_R
from aiida_csi_positioning.utils.input_generator import (
    FingerprintInput, Sections, format_value, parse_bool, parse_ints, read_input
)
from aiida_csi_positioning.utils.provenance import SCENE_SECTIONS, stage_hash

#: Every non-scene key with its default.
DEFAULTS = {
    'run': {
        'output_dir': 'output',
        'scene_file': None,
    },
    'beams': {
        'n_azimuth': 8,
        'n_elevation': 4,
        'target_snr_db': 10.0,
        'calibration_distance': 100.0,
    },
    'dataset': {
        'samples_per_point': 1000,
        'test_samples_per_point': 100,
        'train_fraction': 0.6,
        'split_seed': 0,
    },
    'network': {
        'conv_channels': (8, 16, 32, 64, 64),
        'conv_kernels': (3, 3, 3, 3, 3),
        'conv_strides': (1, 1, 1, 1, 1),
        'conv_paddings': (1, 1, 1, 1, 1),
        'pool_windows': (2, 2, 2, 2),
        'pool_strides': (2, 2, 2, 2),
        'bn_eps': 1e-5,
        'bn_momentum': 0.1,
        'init_seed': 0,
    },
    'training': {
        'epochs': 150,
        'batch_size': 20,
        'learning_rate': 1e-6,
        'weight_decay': 1e-3,
        'beta1': 0.9,
        'beta2': 0.999,
        'epsilon': 1e-8,
        'shuffle_seed': 0,
        'track_test_error': True,
    },
    'positioning': {
        'top_r': DEFAULT_TOP_R,
        'sweep': False,
    },
}

#: Fixed names of the artifacts inside the output directory.
ARTIFACTS = {
    'scene': 'scene.ini',
    'dataset': 'dataset.bin',
    'checkpoint_best': 'checkpoint_best.bin',
    'checkpoint_last': 'checkpoint_last.bin',
    'metrics': 'metrics.csv',
    'test_error': 'test_error.csv',
    'errors': 'errors.csv',
    'report': 'report.txt',
    'summary': 'summary.json',
    'sweep': 'r_sweep.csv',
    'divergence': 'divergence.json',
    'failure': 'failure.json',
}


def apply_overrides(sections: Sections, overrides: Iterable[str]) -> Sections:
    """Apply ``section.key=value`` overrides to a copy of ``sections``.

    Raises:
        RunConfigError: if an override is not of that form
    """
    sections = deepcopy(sections)
    for override in overrides:
        target, separator, value = override.partition('=')
        section, dot, key = target.strip().partition('.')
        if not separator or not dot or not section or not key.strip():
            raise RunConfigError(f'override {override!r} is not of the form section.key=value')
        sections.setdefault(section, {})[key.strip()] = value.strip()
    return sections


class RunConfig:
    """Validated run configuration.

    Args:
        sections: parsed sections, all values as strings
        base_dir: directory relative paths are resolved against
    """

    def __init__(self, sections: Sections, base_dir: str = '.') -> None:
        self.base_dir = os.path.abspath(base_dir)
        sections = deepcopy(sections)

        known = set(DEFAULTS) | set(SCENE_SECTIONS)
        unknown = sorted(set(sections) - known)
        if unknown:
            raise RunConfigError(f'unknown sections: {", ".join(unknown)}')
        for name, defaults in DEFAULTS.items():
            extra = sorted(set(sections.get(name, {})) - set(defaults))
            if extra:
                raise RunConfigError(f'unknown keys in [{name}]: {", ".join(extra)}')

        self._values = {name: {**defaults, **sections.get(name, {})} for name, defaults in DEFAULTS.items()}

        scene_file = self._values['run']['scene_file']
        inline = {name: sections[name] for name in SCENE_SECTIONS if name in sections}
        if scene_file:
            if inline:
                raise RunConfigError('give either [run] scene_file or inline scene sections, not both')
            path = self.resolve(scene_file)
            if not os.path.isfile(path):
                raise RunConfigError(f'scene file {path} does not exist')
            self.scene, _ = self._checked(read_scene, path)
        else:
            self.scene = self._checked(scene_from_sections, inline)

        self.output_dir = self.resolve(str(self._values['run']['output_dir']))
        self.n_az_beams = self._int('beams', 'n_azimuth')
        self.n_el_beams = self._int('beams', 'n_elevation')
        self.target_snr_db = self._float('beams', 'target_snr_db')
        self.calibration_distance = self._float('beams', 'calibration_distance')
        if self.n_az_beams < 1 or self.n_el_beams < 1:
            raise RunConfigError('[beams] needs at least one beam along each axis')
        if not self.calibration_distance > 0:
            raise RunConfigError('[beams] calibration_distance must be positive')

        self.samples_per_point = self._int('dataset', 'samples_per_point')
        self.test_samples_per_point = self._int('dataset', 'test_samples_per_point')
        self.train_fraction = self._float('dataset', 'train_fraction')
        self.split_seed = self._int('dataset', 'split_seed')
        if self.samples_per_point < 2 or self.test_samples_per_point < 0:
            raise RunConfigError('[dataset] needs at least two samples per reference point')
        if not 0.0 < self.train_fraction < 1.0:
            raise RunConfigError(f'[dataset] train_fraction must lie in (0, 1), got {self.train_fraction}')
        if self.split_seed < 0 or self.scene.rng_seed < 0:
            raise RunConfigError('seeds must be non-negative')

        self.top_r = self._int('positioning', 'top_r')
        self.sweep = self._bool('positioning', 'sweep')
        if not 1 <= self.top_r <= len(self.scene.reference_points):
            raise RunConfigError(
                f'[positioning] top_r must lie in [1, {len(self.scene.reference_points)}], got {self.top_r}'
            )

        self.track_test_error = self._bool('training', 'track_test_error')
        try:
            self.train_config = TrainConfig(
                epochs=self._int('training', 'epochs'),
                batch_size=self._int('training', 'batch_size'),
                learning_rate=self._float('training', 'learning_rate'),
                weight_decay=self._float('training', 'weight_decay'),
                beta1=self._float('training', 'beta1'),
                beta2=self._float('training', 'beta2'),
                epsilon=self._float('training', 'epsilon'),
                shuffle_seed=self._int('training', 'shuffle_seed'),
            )
        except ValueError as exception:
            raise RunConfigError(f'invalid [training] value: {exception}')

        # Fails early on impossible architectures, before any data is generated.
        self.network_config(self.scene.n_subcarriers, 2 * self.n_az_beams * self.n_el_beams,
                            len(self.scene.reference_points))

    @classmethod
    def from_file(cls, path, overrides: Iterable[str] = ()) -> 'RunConfig':
        """Read the configuration at ``path`` and apply ``section.key=value`` overrides."""
        sections = apply_overrides(read_input(path), overrides)
        return cls(sections, base_dir=os.path.dirname(os.path.abspath(path)))

    @staticmethod
    def _checked(func, *args):
        try:
            return func(*args)
        except ValueError as exception:
            raise RunConfigError(f'invalid scene: {exception}')

    def _raw(self, section: str, key: str) -> str:
        return format_value(self._values[section][key])

    def _int(self, section: str, key: str) -> int:
        try:
            return int(self._raw(section, key))
        except ValueError:
            raise RunConfigError(f'{section}.{key}: expected an integer, got {self._raw(section, key)!r}')

    def _float(self, section: str, key: str) -> float:
        try:
            return float(self._raw(section, key))
        except ValueError:
            raise RunConfigError(f'{section}.{key}: expected a number, got {self._raw(section, key)!r}')

    def _bool(self, section: str, key: str) -> bool:
        return parse_bool(self._raw(section, key), f'{section}.{key}')

    def _ints(self, key: str, count: int):
        return parse_ints(self._raw('network', key), count, f'network.{key}')

    def resolve(self, path: str) -> str:
        """Absolute form of ``path``, relative paths taken from the configuration directory."""
        return os.path.normpath(os.path.join(self.base_dir, os.path.expanduser(path)))

    def artifact(self, name: str) -> str:
        """Path of the artifact ``name`` (a key of :data:`ARTIFACTS`) in the output directory."""
        return os.path.join(self.output_dir, ARTIFACTS[name])

    def network_config(self, n_subcarriers: int, n_columns: int, n_classes: int) -> NetworkConfig:
        """Network for tensors of shape ``(n_subcarriers, n_columns)`` and ``n_classes`` reference points.

        Raises:
            RunConfigError: if the configured architecture cannot process that input
        """
        kernels = self._ints('conv_kernels', 5)
        windows = self._ints('pool_windows', 4)
        strides = self._ints('pool_strides', 4)
        try:
            config = NetworkConfig(
                input_shape=(1, n_subcarriers, n_columns),
                n_classes=n_classes,
                conv_channels=self._ints('conv_channels', 5),
                conv_kernels=tuple((size, size) for size in kernels),
                conv_strides=self._ints('conv_strides', 5),
                conv_paddings=self._ints('conv_paddings', 5),
                pool_windows=tuple((size, size) for size in windows),
                pool_strides=tuple((size, size) for size in strides),
                bn_eps=self._float('network', 'bn_eps'),
                bn_momentum=self._float('network', 'bn_momentum'),
                init_seed=self._int('network', 'init_seed'),
            )
            flatten_length(config)
        except (ValueError, ShapeMismatchError) as exception:
            raise RunConfigError(f'invalid [network] value: {exception}')
        return config

    @property
    def seeds(self) -> Dict[str, int]:
        """Every seed of the run."""
        return {
            'rng_seed': self.scene.rng_seed,
            'split_seed': self.split_seed,
            'init_seed': self._int('network', 'init_seed'),
            'shuffle_seed': self.train_config.shuffle_seed,
        }

    def sections(self) -> Dict[str, dict]:
        """Effective configuration with every default filled in and the scene in explicit form."""
        sections = {'run': {'output_dir': self._values['run']['output_dir']}}
        sections.update(scene_to_sections(self.scene))
        for name in ('beams', 'dataset', 'network', 'training', 'positioning'):
            sections[name] = dict(self._values[name])
        return sections

    def hash_sections(self) -> Sections:
        """:meth:`sections` with every value formatted as in a configuration file."""
        return {
            name: {key: format_value(value) for key, value in entries.items() if value is not None}
            for name, entries in self.sections().items()
        }

    def stage_hash(self, stage: str) -> str:
        """Hash of the effective configuration the given stage depends on."""
        return stage_hash(self.hash_sections(), stage)

    def render(self) -> str:
        """The effective configuration as a complete configuration file."""
        return FingerprintInput(self.sections(), header='effective run configuration with every default').render()
