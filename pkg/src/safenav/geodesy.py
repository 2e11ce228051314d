"""Pixel <-> GPS conversion on a geo-registered raster and the camera sensor model.

Conventions used throughout the package:

* pixel offsets are ``(dx, dy)`` with x pointing east and y pointing south
  (raster convention), so a positive ``dy`` moves the point towards the equator
  in the northern hemisphere;
* GPS coordinates are stored in degrees, all trigonometry is done in radians;
* the earth is a sphere of radius ``EARTH_RADIUS_M`` unless an anchor overrides it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from safenav.errors import DomainError, OutOfSpanError, PoleError

EARTH_RADIUS_M = 6_371_000.0
POLE_LIMIT_DEG = 89.9

__all__ = [
    "EARTH_RADIUS_M",
    "GeoAnchor",
    "GeoPoint",
    "PixelOffset",
    "SensorPose",
    "gps_to_pixel_offset",
    "local_east_north",
    "pixel_offset_to_gps",
    "rotation_x",
    "rotation_y",
    "rotation_z",
    "sensor_model_factors",
    "sensor_model_matrix",
    "translation",
]


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class PixelOffset:
    dx: float
    dy: float

    def __iter__(self):
        yield self.dx
        yield self.dy


@dataclass(frozen=True)
class GeoAnchor:
    """A GPS point tied to a raster pixel, with the raster's ground sampling distance."""

    center: GeoPoint
    gsd: float
    earth_radius: float = EARTH_RADIUS_M

    def __post_init__(self) -> None:
        if not self.gsd > 0:
            raise ValueError(f"gsd must be positive, got {self.gsd}")
        if not self.earth_radius > 0:
            raise ValueError(f"earth radius must be positive, got {self.earth_radius}")


@dataclass(frozen=True)
class SensorPose:
    """Vehicle position plus gimbal and attitude angles (radians)."""

    lat: float
    lon: float
    altitude: float
    elevation_angle: float = 0.0
    scan_angle: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0
    heading: float = 0.0

    def __post_init__(self) -> None:
        if not self.altitude > 0:
            raise ValueError(f"altitude must be positive, got {self.altitude}")
        GeoPoint(self.lat, self.lon)


def _check_anchor_lat(lat: float) -> None:
    if abs(lat) >= POLE_LIMIT_DEG:
        raise PoleError(f"anchor latitude {lat} too close to a pole")


def _asin_checked(value: float, what: str) -> float:
    if not -1.0 <= value <= 1.0:
        raise DomainError(f"{what} asin argument {value} outside [-1, 1]")
    return math.asin(value)


def pixel_offset_to_gps(anchor: GeoAnchor, offset: PixelOffset | tuple[float, float]) -> GeoPoint:
    """GPS location of the pixel ``offset`` away from the anchor pixel."""
    dx, dy = offset
    lat1 = anchor.center.lat
    _check_anchor_lat(lat1)
    r, er = anchor.gsd, anchor.earth_radius
    dlat = _asin_checked(r * dy / er, "latitude")
    dlon = _asin_checked(r * dx / (er * math.cos(math.radians(lat1))), "longitude")
    lat2 = lat1 - math.degrees(dlat)
    lon2 = anchor.center.lon + math.degrees(dlon)
    if not -90.0 <= lat2 <= 90.0 or not -180.0 <= lon2 <= 180.0:
        raise DomainError(f"offset ({dx}, {dy}) leaves the valid coordinate range")
    return GeoPoint(lat2, lon2)


def gps_to_pixel_offset(anchor: GeoAnchor, target: GeoPoint) -> PixelOffset:
    """Exact inverse of :func:`pixel_offset_to_gps`."""
    lat1 = anchor.center.lat
    _check_anchor_lat(lat1)
    dlat = math.radians(lat1 - target.lat)
    dlon = math.radians(target.lon - anchor.center.lon)
    # asin only returns [-pi/2, pi/2]; anything beyond cannot come from a forward call
    if abs(dlat) > math.pi / 2 or abs(dlon) > math.pi / 2:
        raise OutOfSpanError(f"{target} is not reachable from anchor {anchor.center}")
    r, er = anchor.gsd, anchor.earth_radius
    dy = er * math.sin(dlat) / r
    dx = er * math.cos(math.radians(lat1)) * math.sin(dlon) / r
    return PixelOffset(dx, dy)


def local_east_north(origin: GeoPoint, point: GeoPoint, earth_radius: float = EARTH_RADIUS_M) -> tuple[float, float]:
    """East/north metres of ``point`` relative to ``origin`` in the local spherical model."""
    off = gps_to_pixel_offset(GeoAnchor(origin, 1.0, earth_radius), point)
    return off.dx, -off.dy


# Homogeneous 4x4 building blocks.  Each rotation is the right-handed rotation
# by ``angle`` about its axis (X east, Y north, Z up).


def rotation_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    m = np.eye(4)
    m[1:3, 1:3] = [[c, -s], [s, c]]
    return m


def rotation_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    m = np.eye(4)
    m[0, 0], m[0, 2], m[2, 0], m[2, 2] = c, s, -s, c
    return m


def rotation_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    m = np.eye(4)
    m[0:2, 0:2] = [[c, -s], [s, c]]
    return m


def translation(tx: float, ty: float, tz: float) -> np.ndarray:
    m = np.eye(4)
    m[:3, 3] = (tx, ty, tz)
    return m


def sensor_model_factors(pose: SensorPose, origin: GeoPoint | None = None) -> list[np.ndarray]:
    """The six factors ``[G_y, G_z, R_y, R_x, R_z, T]`` of the world-to-camera map.

    ``origin`` is the local frame's reference point; by default the vehicle's own
    ground position, which makes the translation purely vertical.
    """
    if origin is None:
        origin = GeoPoint(pose.lat, pose.lon)
    east, north = local_east_north(origin, GeoPoint(pose.lat, pose.lon))
    return [
        rotation_y(pose.elevation_angle),
        rotation_z(pose.scan_angle),
        rotation_y(pose.pitch),
        rotation_x(pose.roll),
        rotation_z(pose.heading),
        translation(-east, -north, -pose.altitude),
    ]


def sensor_model_matrix(pose: SensorPose, origin: GeoPoint | None = None) -> np.ndarray:
    """World-to-camera homogeneous transform for a gimballed camera on a vehicle."""
    m = np.eye(4)
    for factor in sensor_model_factors(pose, origin):
        m = m @ factor
    return m
