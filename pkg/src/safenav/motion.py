"""Polylines in raster space and the simulated vehicle state.

Headings and bearings are compass angles in radians: 0 is north (up in the
raster, towards negative y) and angles grow clockwise, so pi/2 is east.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def bearing_of(dx: float, dy: float) -> float:
    """Compass bearing of a raster displacement (y pointing south)."""
    return math.atan2(dx, -dy) % TWO_PI


def unit_of(bearing: float) -> tuple[float, float]:
    """Raster-space unit vector for a compass bearing."""
    return math.sin(bearing), -math.cos(bearing)


@dataclass(frozen=True)
class UavState:
    position: tuple[float, float]
    progress_px: float
    velocity_mps: float
    heading: float = 0.0


class Polyline:
    """Arc-length parametrised polyline through (x, y) raster points."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        if len(pts) == 0:
            raise ValueError("polyline needs at least one point")
        self.points = pts
        seg = np.hypot(*(pts[1:] - pts[:-1]).T) if len(pts) > 1 else np.zeros(0)
        self.cumulative = np.concatenate([[0.0], np.cumsum(seg)])

    @classmethod
    def from_path(cls, path) -> "Polyline":
        """Polyline through a PixelPath's cells, or through any (x, y) sequence."""
        if isinstance(path, cls):
            return path
        cells = getattr(path, "cells", path)
        return cls(cells)

    @property
    def length(self) -> float:
        return float(self.cumulative[-1])

    def __len__(self) -> int:
        return len(self.points)

    def segment_at(self, s: float) -> int:
        """Index i of the segment [i, i+1] containing arc length ``s``."""
        if len(self.points) < 2:
            return 0
        i = int(np.searchsorted(self.cumulative, s, side="right")) - 1
        return min(max(i, 0), len(self.points) - 2)

    def point_at(self, s: float) -> tuple[float, float]:
        if len(self.points) < 2 or s <= 0:
            return float(self.points[0, 0]), float(self.points[0, 1])
        if s >= self.length:
            return float(self.points[-1, 0]), float(self.points[-1, 1])
        i = self.segment_at(s)
        seg = self.cumulative[i + 1] - self.cumulative[i]
        t = (s - self.cumulative[i]) / seg if seg > 0 else 0.0
        p = self.points[i] + t * (self.points[i + 1] - self.points[i])
        return float(p[0]), float(p[1])

    def heading_at(self, s: float, default: float = 0.0) -> float:
        if len(self.points) < 2:
            return default
        i = self.segment_at(min(max(s, 0.0), self.length))
        # skip zero-length segments
        for j in list(range(i, len(self.points) - 1)) + list(range(i - 1, -1, -1)):
            d = self.points[j + 1] - self.points[j]
            if d[0] or d[1]:
                return bearing_of(d[0], d[1])
        return default
