"""Moving-object avoidance: object states, collision prediction and cost inflation.

Each visible object contributes oriented Gaussian multipliers to the weight
map.  Across-track spread follows the object's width, along-track spread the
distance it covers during the safety margin.  Multipliers are rescaled to peak
at ``peak_multiplier`` and never drop below 1, so they only ever add penalty on
top of the land-use weights they multiply.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from safenav.errors import DegenerateStateError, ScenarioError
from safenav.motion import Polyline, UavState, bearing_of, unit_of
from safenav.planner import PixelPath, plan_path

TRACK_HEADER = ["frame", "object_id", "x_px", "y_px", "width_px", "height_px"]


@dataclass(frozen=True)
class InflationConfig:
    safety_margin_s: float = 5.0
    delta_s: float = 5.0
    sigma_x_scale: float = 1.0
    peak_multiplier: float = 20.0
    cutoff_sigmas: float = 4.0

    def __post_init__(self) -> None:
        for name in ("safety_margin_s", "delta_s", "sigma_x_scale", "cutoff_sigmas"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.peak_multiplier > 1:
            raise ValueError("peak_multiplier must exceed 1")


# --------------------------------------------------------------------------
# Tracks


class ObjectTrack:
    """Ground-truth positions of one object, one entry per frame it is seen."""

    def __init__(self, object_id: int, frames, xs, ys, widths, heights):
        self.object_id = int(object_id)
        self.frames = np.asarray(frames, dtype=np.int64)
        self.xs = np.asarray(xs, dtype=np.float64)
        self.ys = np.asarray(ys, dtype=np.float64)
        self.widths = np.asarray(widths, dtype=np.float64)
        self.heights = np.asarray(heights, dtype=np.float64)
        n = len(self.frames)
        if not all(len(a) == n for a in (self.xs, self.ys, self.widths, self.heights)):
            raise ScenarioError(f"object {object_id}: column lengths differ")
        if n and np.any(np.diff(self.frames) <= 0):
            raise ScenarioError(f"object {object_id}: frame indices must be strictly increasing")
        self._index = {int(f): i for i, f in enumerate(self.frames)}

    def __len__(self) -> int:
        return len(self.frames)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ObjectTrack):
            return NotImplemented
        return self.object_id == other.object_id and all(
            np.array_equal(getattr(self, a), getattr(other, a)) for a in ("frames", "xs", "ys", "widths", "heights")
        )

    def __repr__(self) -> str:
        span = f"{self.frames[0]}..{self.frames[-1]}" if len(self) else "empty"
        return f"ObjectTrack(id={self.object_id}, frames={span})"

    def index_of(self, frame: int) -> int | None:
        return self._index.get(int(frame))

    def position(self, i: int) -> tuple[float, float]:
        return float(self.xs[i]), float(self.ys[i])


def read_tracks_csv(source) -> list[ObjectTrack]:
    """Parse ``frame,object_id,x_px,y_px,width_px,height_px`` rows into tracks."""
    text = Path(source).read_text(encoding="utf-8") if not isinstance(source, io.TextIOBase) else source.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != TRACK_HEADER:
        raise ScenarioError(f"track file header must be {','.join(TRACK_HEADER)}")
    rows: dict[int, list] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 6:
            raise ScenarioError(f"line {lineno}: expected 6 columns")
        try:
            frame, oid = int(row[0]), int(row[1])
            vals = [float(v) for v in row[2:]]
        except ValueError as exc:
            raise ScenarioError(f"line {lineno}: {exc}") from exc
        entries = rows.setdefault(oid, [])
        if entries and frame <= entries[-1][0]:
            raise ScenarioError(f"line {lineno}: object {oid} frames not strictly increasing")
        entries.append((frame, *vals))
    tracks = []
    for oid in sorted(rows):
        cols = list(zip(*rows[oid]))
        tracks.append(ObjectTrack(oid, *cols))
    return tracks


def write_tracks_csv(tracks, path=None) -> str:
    """Frame-major CSV; returns the text and writes it when ``path`` is given."""
    rows = []
    for t in tracks:
        for i in range(len(t)):
            rows.append((int(t.frames[i]), t.object_id, t.xs[i], t.ys[i], t.widths[i], t.heights[i]))
    rows.sort(key=lambda r: (r[0], r[1]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACK_HEADER)
    for r in rows:
        w.writerow([r[0], r[1]] + [repr(float(v)) for v in r[2:]])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


# --------------------------------------------------------------------------
# Object state and collision prediction


@dataclass(frozen=True)
class ObjectState:
    object_id: int
    position: tuple[float, float]
    velocity_mps: float
    bearing: float
    width_px: float


def estimate_object_state(track: ObjectTrack, frame: int, gsd: float, dataset_fps: float) -> ObjectState:
    """Constant-velocity state from the displacement to the previous entry.

    The first entry looks forward instead.  A stationary object keeps the bearing
    of its last movement, or 0 if it never moved.
    """
    i = track.index_of(frame)
    if i is None:
        raise KeyError(f"object {track.object_id} has no entry at frame {frame}")
    if len(track) == 1:
        return ObjectState(track.object_id, track.position(i), 0.0, 0.0, float(track.widths[i]))
    a, b = (i - 1, i) if i > 0 else (0, 1)
    dx = track.xs[b] - track.xs[a]
    dy = track.ys[b] - track.ys[a]
    frames = track.frames[b] - track.frames[a]
    speed = math.hypot(dx, dy) / frames * gsd * dataset_fps
    if speed > 0:
        bearing = bearing_of(dx, dy)
    else:
        bearing = 0.0
        for j in range(a, 0, -1):
            ddx = track.xs[j] - track.xs[j - 1]
            ddy = track.ys[j] - track.ys[j - 1]
            if ddx or ddy:
                bearing = bearing_of(ddx, ddy)
                break
    return ObjectState(track.object_id, track.position(i), float(speed), bearing, float(track.widths[i]))


@dataclass(frozen=True)
class CollisionPrediction:
    collides: bool
    collision_point: tuple[float, float] | None
    t_obj_s: float
    t_uav_s: float

    @property
    def time_gap_s(self) -> float:
        return abs(self.t_obj_s - self.t_uav_s)


def predict_collision(path, uav: UavState, obj: ObjectState, gsd: float) -> CollisionPrediction:
    """Where the object's motion ray first meets the path ahead of the UAV.

    Times are how long object and UAV each need to reach that point at their
    current speeds.  A stationary object never collides.
    """
    line = path if isinstance(path, Polyline) else Polyline.from_path(path)
    if obj.velocity_mps <= 0 or len(line) < 2:
        return CollisionPrediction(False, None, math.inf, math.inf)
    px, py = obj.position
    ux, uy = unit_of(obj.bearing)
    s0 = min(max(uav.progress_px, 0.0), line.length)
    first = line.segment_at(s0)
    a = line.points[first:-1].copy()
    b = line.points[first + 1 :]
    sa = line.cumulative[first:-1].copy()
    a[0], sa[0] = line.point_at(s0), s0
    e = b - a
    seg_len = np.hypot(e[:, 0], e[:, 1])
    w = a - (px, py)
    den = ux * e[:, 1] - uy * e[:, 0]
    w_cross_e = w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]
    w_cross_u = w[:, 0] * uy - w[:, 1] * ux
    with np.errstate(divide="ignore", invalid="ignore"):
        t = w_cross_e / den
        u = w_cross_u / den
    parallel = np.abs(den) < 1e-12 * np.maximum(seg_len, 1e-300)
    hit = ~parallel & (t >= 0) & (u >= -1e-12) & (u <= 1 + 1e-12) & (seg_len > 0)
    # collinear segments: the ray meets them at whichever end it reaches first
    collinear = parallel & (np.abs(w_cross_u) <= 1e-9 * seg_len) & (seg_len > 0)
    if collinear.any():
        ta = w[:, 0] * ux + w[:, 1] * uy
        tb = (b[:, 0] - px) * ux + (b[:, 1] - py) * uy
        reach = collinear & (np.maximum(ta, tb) >= 0)
        tc = np.maximum(0.0, np.minimum(ta, tb))
        uc = np.abs(tc - ta) / np.where(seg_len > 0, seg_len, 1.0)
        t = np.where(reach, tc, t)
        u = np.where(reach, uc, u)
        hit |= reach
    if not hit.any():
        return CollisionPrediction(False, None, math.inf, math.inf)
    k = int(np.argmin(np.where(hit, t, np.inf)))
    best_t = float(t[k])
    best_s = float(sa[k] + min(max(u[k], 0.0), 1.0) * seg_len[k])
    point = (px + best_t * ux, py + best_t * uy)
    t_obj = best_t * gsd / obj.velocity_mps
    t_uav = (best_s - s0) * gsd / uav.velocity_mps if uav.velocity_mps > 0 else math.inf
    return CollisionPrediction(True, point, t_obj, t_uav)


def _round_cell(p) -> tuple[int, int]:
    return int(round(p[0])), int(round(p[1]))


def displaced(obj: ObjectState, distance_m: float, gsd: float) -> tuple[float, float]:
    """Object position moved ``distance_m`` along its bearing."""
    ux, uy = unit_of(obj.bearing)
    d = distance_m / gsd
    return obj.position[0] + d * ux, obj.position[1] + d * uy


def placement_locations(
    pred: CollisionPrediction,
    obj: ObjectState,
    uav: UavState,
    cfg: InflationConfig,
    gsd: float,
    fps: float,
) -> list[tuple[int, int]]:
    """The two cells that receive an inflation field for this object.

    Close-call collisions (time gap under ``delta_s``) get the collision point;
    everything else gets the object's next-frame location.  Both cases add the
    projected location: where the object will be once the UAV has flown the
    current UAV-object distance.
    """
    if uav.velocity_mps <= 0:
        raise DegenerateStateError("projected location undefined for a UAV at rest")
    d_m = math.hypot(uav.position[0] - obj.position[0], uav.position[1] - obj.position[1]) * gsd
    projected = displaced(obj, obj.velocity_mps * d_m / uav.velocity_mps, gsd)
    if pred.collides and pred.time_gap_s < cfg.delta_s:
        first = pred.collision_point
    else:
        first = displaced(obj, obj.velocity_mps / fps, gsd)
    return [_round_cell(first), _round_cell(projected)]


# --------------------------------------------------------------------------
# Multiplier fields


def _multiplier(xs, ys, center, sig_along, sig_across, bearing, peak, k) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    ux, uy = unit_of(bearing)
    dx = xs - center[0]
    dy = ys - center[1]
    along = dx * ux + dy * uy
    across = dx * -uy + dy * ux
    m2 = (along / sig_along) ** 2 + (across / sig_across) ** 2
    k2 = k * k
    tail = math.exp(-0.5 * k2)
    # affine rescale: 1 at the cutoff ellipse, ``peak`` at the centre
    g = (np.exp(-0.5 * m2) - tail) / (1.0 - tail)
    return np.where(m2 >= k2, 1.0, 1.0 + (peak - 1.0) * np.clip(g, 0.0, 1.0))


@dataclass(frozen=True, eq=False)
class MultiplierField:
    """Multipliers on the cell block ``[y0:y0+h, x0:x0+w]``; 1 everywhere else."""

    x0: int
    y0: int
    values: np.ndarray
    center: tuple[float, float]
    sigma_along_px: float
    sigma_across_px: float
    bearing: float
    peak: float
    cutoff_sigmas: float

    def evaluate(self, xs, ys) -> np.ndarray:
        """Analytic multiplier at arbitrary raster coordinates."""
        return _multiplier(
            xs, ys, self.center, self.sigma_along_px, self.sigma_across_px,
            self.bearing, self.peak, self.cutoff_sigmas,
        )

    def at(self, cell) -> float:
        x, y = cell
        h, w = self.values.shape
        if self.x0 <= x < self.x0 + w and self.y0 <= y < self.y0 + h:
            return float(self.values[y - self.y0, x - self.x0])
        return 1.0


def field_sigmas(obj: ObjectState, cfg: InflationConfig, gsd: float) -> tuple[float, float]:
    """(along-track, across-track) standard deviations in pixels."""
    across = cfg.sigma_x_scale * obj.width_px
    if not across > 0:
        raise ValueError(f"object {obj.object_id}: width must be positive")
    along = max(obj.velocity_mps * cfg.safety_margin_s / gsd, 1.0)
    return along, across


def gaussian_multiplier_field(obj: ObjectState, center, cfg: InflationConfig, gsd: float) -> MultiplierField:
    sig_along, sig_across = field_sigmas(obj, cfg, gsd)
    ux, uy = unit_of(obj.bearing)
    k = cfg.cutoff_sigmas
    # half extents of the cutoff ellipse's bounding box
    ex = k * math.hypot(sig_along * ux, sig_across * uy)
    ey = k * math.hypot(sig_along * uy, sig_across * ux)
    cx, cy = float(center[0]), float(center[1])
    x0, x1 = math.floor(cx - ex), math.ceil(cx + ex)
    y0, y1 = math.floor(cy - ey), math.ceil(cy + ey)
    xs, ys = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
    values = _multiplier(xs, ys, (cx, cy), sig_along, sig_across, obj.bearing, cfg.peak_multiplier, k)
    values.setflags(write=False)
    return MultiplierField(x0, y0, values, (cx, cy), sig_along, sig_across, obj.bearing, cfg.peak_multiplier, k)


# --------------------------------------------------------------------------
# Dynamic map and replanning


class DynamicWeightMap:
    """Base weight map times a multiplier layer; the base is never modified."""

    def __init__(self, base, multiplier: np.ndarray):
        if multiplier.shape != base.weights.shape:
            raise ValueError("multiplier layer must match the base map")
        self.base = base
        self.multiplier = multiplier
        self.multiplier.setflags(write=False)
        self._weights = None

    @property
    def weights(self) -> np.ndarray:
        if self._weights is None:
            self._weights = self.base.weights * self.multiplier
            self._weights.setflags(write=False)
        return self._weights

    @property
    def config(self):
        return self.base.config

    @property
    def gsd(self) -> float:
        return self.base.gsd

    @property
    def anchor(self):
        return self.base.anchor

    def cell_to_gps(self, cell):
        return self.base.cell_to_gps(cell)


def apply_dynamic_costs(base, fields) -> DynamicWeightMap:
    multiplier = np.ones(base.weights.shape)
    height, width = multiplier.shape
    for f in fields:
        h, w = f.values.shape
        x0, y0 = max(f.x0, 0), max(f.y0, 0)
        x1, y1 = min(f.x0 + w, width), min(f.y0 + h, height)
        if x1 <= x0 or y1 <= y0:
            continue
        multiplier[y0:y1, x0:x1] *= f.values[y0 - f.y0 : y1 - f.y0, x0 - f.x0 : x1 - f.x0]
    return DynamicWeightMap(base, multiplier)


def replan(dyn: DynamicWeightMap, uav: UavState, goal) -> PixelPath:
    """Cheapest path on the inflated map from the UAV's current cell to the goal."""
    return plan_path(dyn, _round_cell(uav.position), goal)
