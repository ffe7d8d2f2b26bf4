# -*- coding: utf-8 -*-
"""Scene geometry and the geometric LOS + single-bounce ray model.

The model keeps the propagation planar for blockage: a route is blocked when its ground projection crosses a building
footprint with positive length. Heights only enter path lengths, departure elevations and the check that a specular
point lies below the roof of the reflecting building.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy

from aiida_csi_positioning.exceptions import BlockedLocationError, SceneGeometryError
from aiida_csi_positioning.utils.log import get_logger

LOGGER = get_logger('channel.geometry')

SPEED_OF_LIGHT = 299_792_458.0

# Overlaps shorter than this (meters) are numerical contact, not blockage.
_CONTACT_TOLERANCE = 1e-9

Point2D = Tuple[float, float]


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform rectangular array at the base station.

    ``orientation`` holds the boresight as (azimuth, elevation) in radians; elevation is measured from the horizontal
    plane, so a downtilt is negative.
    """

    n_azimuth: int = 16
    n_elevation: int = 8
    element_spacing: float = 0.5
    orientation: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.n_azimuth < 1 or self.n_elevation < 1:
            raise SceneGeometryError(
                f'array needs at least one element per axis, got {self.n_azimuth}x{self.n_elevation}'
            )
        if not self.element_spacing > 0:
            raise SceneGeometryError(f'element spacing must be positive, got {self.element_spacing}')
        object.__setattr__(self, 'orientation', tuple(float(angle) for angle in self.orientation))

    @property
    def n_elements(self) -> int:
        """Total number of elements ``N_TX``."""
        return self.n_azimuth * self.n_elevation

    def frame(self) -> numpy.ndarray:
        """Return the array frame as rows (boresight, horizontal axis, vertical axis) in global coordinates."""
        azimuth, elevation = self.orientation
        boresight = (
            math.cos(elevation) * math.cos(azimuth), math.cos(elevation) * math.sin(azimuth), math.sin(elevation)
        )
        horizontal = (-math.sin(azimuth), math.cos(azimuth), 0.0)
        vertical = (
            -math.sin(elevation) * math.cos(azimuth), -math.sin(elevation) * math.sin(azimuth), math.cos(elevation)
        )
        return numpy.array([boresight, horizontal, vertical])


@dataclass(frozen=True)
class Building:
    """Axis-aligned rectangular footprint with a flat roof."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float
    height: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise SceneGeometryError(f'degenerate footprint {self}')
        if not self.height > 0:
            raise SceneGeometryError(f'building height must be positive, got {self.height}')

    def contains(self, point: Point2D) -> bool:
        """Return whether ``point`` lies in the closed footprint."""
        return self.xmin <= point[0] <= self.xmax and self.ymin <= point[1] <= self.ymax

    def crosses(self, start: Point2D, end: Point2D) -> bool:
        """Return whether the segment ``start``-``end`` runs through the footprint with positive length.

        Liang-Barsky clipping of the segment against the closed rectangle.
        """
        dx = end[0] - start[0]
        dy = end[1] - start[1]
        enter, leave = 0.0, 1.0
        for direction, distance in (
            (-dx, start[0] - self.xmin),
            (dx, self.xmax - start[0]),
            (-dy, start[1] - self.ymin),
            (dy, self.ymax - start[1]),
        ):
            if direction == 0.0:
                if distance < 0.0:
                    return False
                continue
            ratio = distance / direction
            if direction < 0.0:
                enter = max(enter, ratio)
            else:
                leave = min(leave, ratio)
            if enter > leave:
                return False
        return (leave - enter) * math.hypot(dx, dy) > _CONTACT_TOLERANCE

    def walls(self) -> List['Wall']:
        """The four walls in a fixed order: south, east, north, west."""
        return [
            Wall(axis=1, position=self.ymin, low=self.xmin, high=self.xmax, outward=-1.0, height=self.height),
            Wall(axis=0, position=self.xmax, low=self.ymin, high=self.ymax, outward=1.0, height=self.height),
            Wall(axis=1, position=self.ymax, low=self.xmin, high=self.xmax, outward=1.0, height=self.height),
            Wall(axis=0, position=self.xmin, low=self.ymin, high=self.ymax, outward=-1.0, height=self.height),
        ]


@dataclass(frozen=True)
class Wall:
    """Vertical wall on the line ``coordinate[axis] == position`` spanning ``[low, high]`` along the other axis."""

    axis: int
    position: float
    low: float
    high: float
    outward: float
    height: float

    def faces(self, point: Point2D) -> bool:
        """Return whether ``point`` is strictly on the outward side of the wall."""
        return (point[self.axis] - self.position) * self.outward > 0.0

    def mirror(self, point: Point2D) -> Point2D:
        """Mirror image of ``point`` across the wall line."""
        mirrored = list(point)
        mirrored[self.axis] = 2.0 * self.position - point[self.axis]
        return (mirrored[0], mirrored[1])

    def specular_point(self, source: Point2D, target: Point2D) -> Optional[Point2D]:
        """Specular reflection point for the route ``source`` -> wall -> ``target``, if it falls on the wall."""
        if not (self.faces(source) and self.faces(target)):
            return None
        image = self.mirror(source)
        span = target[self.axis] - image[self.axis]
        if span == 0.0:
            return None
        fraction = (self.position - image[self.axis]) / span
        other = 1 - self.axis
        along = image[other] + fraction * (target[other] - image[other])
        if not self.low <= along <= self.high:
            return None
        point = [0.0, 0.0]
        point[self.axis] = self.position
        point[other] = along
        return (point[0], point[1])


@dataclass(frozen=True)
class Scene:
    """Static propagation scene around one base station.

    Distances are meters, frequencies Hz. ``tx_gain`` scales every path amplitude (linear); ``reflection_loss_db`` is
    the amplitude loss per bounce.
    """

    bs_position: Tuple[float, float, float]
    array: ArrayGeometry
    carrier_frequency: float = 30e9
    subcarrier_spacing: float = 60e3
    n_subcarriers: int = 240
    buildings: Tuple[Building, ...] = ()
    reference_points: Tuple[Point2D, ...] = ()
    test_points: Tuple[Point2D, ...] = ()
    rng_seed: int = 0
    tx_gain: float = 1e4
    ue_height: float = 1.5
    reflection_loss_db: float = 6.0
    reference_names: Tuple[str, ...] = field(default=())
    test_names: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, 'bs_position', tuple(float(value) for value in self.bs_position))
        object.__setattr__(self, 'buildings', tuple(self.buildings))
        object.__setattr__(self, 'reference_points', tuple((float(x), float(y)) for x, y in self.reference_points))
        object.__setattr__(self, 'test_points', tuple((float(x), float(y)) for x, y in self.test_points))
        if not self.reference_names:
            names = tuple(f'r{index}' for index in range(len(self.reference_points)))
            object.__setattr__(self, 'reference_names', names)
        if not self.test_names:
            object.__setattr__(self, 'test_names', tuple(f't{index}' for index in range(len(self.test_points))))
        self.validate()

    def validate(self) -> None:
        """Check the scene invariants, raising :class:`SceneGeometryError` on the first violation."""
        if len(self.bs_position) != 3:
            raise SceneGeometryError('bs_position needs x, y and z')
        if self.n_subcarriers < 1:
            raise SceneGeometryError(f'need at least one subcarrier, got {self.n_subcarriers}')
        if not (self.carrier_frequency > 0 and self.subcarrier_spacing > 0):
            raise SceneGeometryError('carrier frequency and subcarrier spacing must be positive')
        if not self.tx_gain > 0:
            raise SceneGeometryError(f'tx_gain must be positive, got {self.tx_gain}')
        if len(self.reference_names) != len(self.reference_points) or len(self.test_names) != len(self.test_points):
            raise SceneGeometryError('point names and point coordinates have different lengths')
        if len(set(self.reference_names)) != len(self.reference_names) or len(set(self.test_names)) != len(
            self.test_names
        ):
            raise SceneGeometryError('point names must be unique')
        if self.blocking_building(self.bs_xy) is not None:
            raise BlockedLocationError(f'base station {self.bs_xy} lies inside a building footprint')
        for kind, points in (('reference', self.reference_points), ('test', self.test_points)):
            for point in points:
                if self.blocking_building(point) is not None:
                    raise BlockedLocationError(f'{kind} point {point} lies inside a building footprint')

    @property
    def bs_xy(self) -> Point2D:
        return (self.bs_position[0], self.bs_position[1])

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    def blocking_building(self, point: Point2D) -> Optional[Building]:
        """Return the first building whose footprint contains ``point``."""
        for building in self.buildings:
            if building.contains(point):
                return building
        return None

    def is_clear(self, start: Point2D, end: Point2D) -> bool:
        """Return whether no footprint blocks the ground segment ``start``-``end``."""
        return not any(building.crosses(start, end) for building in self.buildings)

    def subcarrier_offsets(self) -> numpy.ndarray:
        """Frequency offsets ``(m - M/2) * spacing`` of the subcarriers relative to the carrier, in Hz."""
        indices = numpy.arange(self.n_subcarriers, dtype=float)
        return (indices - self.n_subcarriers / 2.0) * self.subcarrier_spacing


@dataclass(frozen=True)
class Path:
    """One propagation path from the base station to a location."""

    complex_gain: complex
    delay: float
    azimuth_departure: float
    elevation_departure: float
    is_los: bool = False


@dataclass(frozen=True)
class PathSet:
    """All paths reaching one location; may be empty under total blockage."""

    paths: Tuple[Path, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'paths', tuple(self.paths))
        if sum(1 for path in self.paths if path.is_los) > 1:
            raise SceneGeometryError('a path set holds at most one line-of-sight path')
        for path in self.paths:
            if path.delay < 0:
                raise SceneGeometryError(f'negative path delay {path.delay}')
            if not numpy.isfinite(path.complex_gain):
                raise SceneGeometryError(f'non-finite path gain {path.complex_gain}')

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    @property
    def has_los(self) -> bool:
        return any(path.is_los for path in self.paths)

    def scaled(self, factor: complex) -> 'PathSet':
        """Return a copy with every complex gain multiplied by ``factor``."""
        return PathSet(
            tuple(
                Path(path.complex_gain * factor, path.delay, path.azimuth_departure, path.elevation_departure,
                     path.is_los) for path in self.paths
            )
        )


def trace_paths(scene: Scene, location: Point2D) -> PathSet:
    """Trace the LOS path and every unobstructed single-bounce specular path to ``location``.

    Args:
        scene (Scene): the scene
        location (tuple): ground coordinates (x, y) of the receiver in meters

    Returns:
        PathSet: LOS path first (if any), then reflections ordered by building and wall

    Raises:
        BlockedLocationError: if the location lies inside a building footprint
    """
    location = (float(location[0]), float(location[1]))
    if scene.blocking_building(location) is not None:
        raise BlockedLocationError(f'location {location} lies inside a building footprint')

    source = scene.bs_xy
    height_difference = scene.ue_height - scene.bs_position[2]
    amplitude_scale = scene.wavelength / (4.0 * math.pi) * scene.tx_gain
    reflection_factor = 10.0**(-scene.reflection_loss_db / 20.0)
    paths = []

    if scene.is_clear(source, location):
        ground = math.hypot(location[0] - source[0], location[1] - source[1])
        length = math.hypot(ground, height_difference)
        paths.append(
            Path(
                complex_gain=complex(amplitude_scale / length),
                delay=length / SPEED_OF_LIGHT,
                azimuth_departure=math.atan2(location[1] - source[1], location[0] - source[0]),
                elevation_departure=math.atan2(height_difference, ground),
                is_los=True,
            )
        )

    for building in scene.buildings:
        for wall in building.walls():
            point = wall.specular_point(source, location)
            if point is None:
                continue
            first = math.hypot(point[0] - source[0], point[1] - source[1])
            second = math.hypot(location[0] - point[0], location[1] - point[1])
            ground = first + second
            if ground == 0.0:
                continue
            bounce_height = scene.bs_position[2] + height_difference * first / ground
            if bounce_height > wall.height:
                continue
            if not (scene.is_clear(source, point) and scene.is_clear(point, location)):
                continue
            length = math.hypot(ground, height_difference)
            paths.append(
                Path(
                    complex_gain=complex(amplitude_scale / length * reflection_factor),
                    delay=length / SPEED_OF_LIGHT,
                    azimuth_departure=math.atan2(point[1] - source[1], point[0] - source[0]),
                    elevation_departure=math.atan2(height_difference, ground),
                    is_los=False,
                )
            )

    if not paths:
        LOGGER.warning(f'no propagation path reaches location {location}')
    else:
        LOGGER.debug(f'{len(paths)} paths to {location} (LOS: {paths[0].is_los})')

    return PathSet(tuple(paths))


def is_los(scene: Scene, location: Point2D) -> bool:
    """Return whether ``location`` has line of sight to the base station."""
    return scene.is_clear(scene.bs_xy, (float(location[0]), float(location[1])))


#EOF
