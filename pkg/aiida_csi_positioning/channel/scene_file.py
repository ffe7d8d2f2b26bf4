# -*- coding: utf-8 -*-
"""Reading and writing scenes as INI-style section files.

Sections and keys (lengths in meters, frequencies in Hz, angles in radians)::

    [scene]            bs_position = x, y, z; carrier_frequency; subcarrier_spacing; n_subcarriers; rng_seed;
                       tx_gain; ue_height; reflection_loss_db
    [array]            n_azimuth; n_elevation; element_spacing; orientation = azimuth, elevation
    [buildings]        <name> = xmin, ymin, xmax, ymax, height
    [reference_grid]   origin = x, y; shape = nx, ny; spacing
    [reference_points] <name> = x, y          (alternative to the grid)
    [test_points]      <name> = x, y

The materialized scene file written by :func:`write_scene` always lists the points explicitly and carries a
``[provenance]`` section.
"""
from typing import Dict, Optional, Tuple

from aiida_csi_positioning.exceptions import RunConfigError
from aiida_csi_positioning.utils.input_generator import (
    FingerprintInput, parse_floats, parse_ints, read_input
)

from .geometry import ArrayGeometry, Building, Scene

SCENE_DEFAULTS = {
    'bs_position': (0.0, 0.0, 10.0),
    'carrier_frequency': 30e9,
    'subcarrier_spacing': 60e3,
    'n_subcarriers': 240,
    'rng_seed': 0,
    'tx_gain': 1e4,
    'ue_height': 1.5,
    'reflection_loss_db': 6.0,
}

ARRAY_DEFAULTS = {
    'n_azimuth': 16,
    'n_elevation': 8,
    'element_spacing': 0.5,
    'orientation': (0.0, 0.0),
}

_SCENE_FLOATS = ('carrier_frequency', 'subcarrier_spacing', 'tx_gain', 'ue_height', 'reflection_loss_db')


def _check_keys(section: str, entries: dict, known) -> None:
    unknown = sorted(set(entries) - set(known))
    if unknown:
        raise RunConfigError(f'unknown keys in [{section}]: {", ".join(unknown)}')


def grid_points(origin, shape, spacing) -> Tuple[Tuple[float, float], ...]:
    """Points of a regular grid, x varying fastest."""
    n_x, n_y = shape
    if n_x < 1 or n_y < 1 or not spacing > 0:
        raise RunConfigError(f'invalid reference grid of shape {shape} and spacing {spacing}')
    return tuple((origin[0] + i_x * spacing, origin[1] + i_y * spacing) for i_y in range(n_y) for i_x in range(n_x))


def _named_points(section: str, entries: dict):
    names, points = [], []
    for name, value in entries.items():
        names.append(name)
        points.append(parse_floats(value, 2, f'{section}.{name}'))
    return tuple(names), tuple(points)


def scene_from_sections(sections: Dict[str, Dict[str, str]]) -> Scene:
    """Build and validate a :class:`Scene` from parsed configuration sections.

    Raises:
        RunConfigError: on malformed or unknown keys
        SceneGeometryError: when the geometry violates the scene invariants
    """
    scene_section = sections.get('scene', {})
    array_section = sections.get('array', {})
    _check_keys('scene', scene_section, SCENE_DEFAULTS)
    _check_keys('array', array_section, ARRAY_DEFAULTS)

    try:
        kwargs = {key: float(scene_section[key]) for key in _SCENE_FLOATS if key in scene_section}
        if 'n_subcarriers' in scene_section:
            kwargs['n_subcarriers'] = int(scene_section['n_subcarriers'])
        if 'rng_seed' in scene_section:
            kwargs['rng_seed'] = int(scene_section['rng_seed'])
        array = ArrayGeometry(
            n_azimuth=int(array_section.get('n_azimuth', ARRAY_DEFAULTS['n_azimuth'])),
            n_elevation=int(array_section.get('n_elevation', ARRAY_DEFAULTS['n_elevation'])),
            element_spacing=float(array_section.get('element_spacing', ARRAY_DEFAULTS['element_spacing'])),
            orientation=parse_floats(array_section['orientation'], 2, 'array.orientation')
            if 'orientation' in array_section else ARRAY_DEFAULTS['orientation'],
        )
    except ValueError as exception:
        raise RunConfigError(f'invalid [scene] or [array] value: {exception}')

    bs_position = SCENE_DEFAULTS['bs_position']
    if 'bs_position' in scene_section:
        bs_position = parse_floats(scene_section['bs_position'], 3, 'scene.bs_position')

    buildings = tuple(
        Building(*parse_floats(value, 5, f'buildings.{name}')) for name, value in sections.get('buildings', {}).items()
    )

    if 'reference_grid' in sections and 'reference_points' in sections:
        raise RunConfigError('give either [reference_grid] or [reference_points], not both')
    if 'reference_grid' in sections:
        grid = sections['reference_grid']
        _check_keys('reference_grid', grid, ('origin', 'shape', 'spacing'))
        try:
            points = grid_points(
                parse_floats(grid.get('origin', '0, 0'), 2, 'reference_grid.origin'),
                parse_ints(grid.get('shape', '1, 1'), 2, 'reference_grid.shape'),
                float(grid.get('spacing', '10.0')),
            )
        except ValueError as exception:
            raise RunConfigError(f'invalid [reference_grid] value: {exception}')
        reference_names = tuple(f'r{index}' for index in range(len(points)))
    else:
        reference_names, points = _named_points('reference_points', sections.get('reference_points', {}))

    test_names, test_points = _named_points('test_points', sections.get('test_points', {}))

    return Scene(
        bs_position=bs_position,
        array=array,
        buildings=buildings,
        reference_points=points,
        test_points=test_points,
        reference_names=reference_names,
        test_names=test_names,
        **kwargs,
    )


def scene_to_sections(scene: Scene) -> Dict[str, dict]:
    """Explicit section form of ``scene``; :func:`scene_from_sections` restores an equal scene."""
    return {
        'scene': {
            'bs_position': scene.bs_position,
            'carrier_frequency': float(scene.carrier_frequency),
            'subcarrier_spacing': float(scene.subcarrier_spacing),
            'n_subcarriers': scene.n_subcarriers,
            'rng_seed': scene.rng_seed,
            'tx_gain': float(scene.tx_gain),
            'ue_height': float(scene.ue_height),
            'reflection_loss_db': float(scene.reflection_loss_db),
        },
        'array': {
            'n_azimuth': scene.array.n_azimuth,
            'n_elevation': scene.array.n_elevation,
            'element_spacing': float(scene.array.element_spacing),
            'orientation': scene.array.orientation,
        },
        'buildings': {
            f'b{index}': (
                float(building.xmin), float(building.ymin), float(building.xmax), float(building.ymax),
                float(building.height)
            ) for index, building in enumerate(scene.buildings)
        },
        'reference_points': dict(zip(scene.reference_names, scene.reference_points)),
        'test_points': dict(zip(scene.test_names, scene.test_points)),
    }


def write_scene(scene: Scene, path, provenance: Optional[dict] = None) -> None:
    """Write the materialized scene file."""
    sections = scene_to_sections(scene)
    if provenance:
        sections['provenance'] = dict(provenance)
    content = FingerprintInput(sections, header='materialized scene').render()
    with open(path, 'w', encoding='utf-8') as handle:
        handle.write(content)


def read_scene(path) -> Tuple[Scene, dict]:
    """Read a scene file, returning the scene and its provenance section (empty if absent)."""
    sections = read_input(path)
    provenance = sections.pop('provenance', {})
    return scene_from_sections(sections), provenance
