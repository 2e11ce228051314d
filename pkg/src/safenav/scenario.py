"""Synthetic city scenarios and the scenario file format.

A synthetic city is a grid of two-lane roads (Danger) around blocks that hold
a building footprint (Safe) inside a neutral margin; a seeded fraction of
blocks are open ground (Neutral).  Cars drive along the lanes at constant
speed, entering at one map edge and leaving at the opposite one.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from safenav.dynamics import InflationConfig, ObjectTrack, read_tracks_csv, write_tracks_csv
from safenav.errors import ScenarioError
from safenav.geodesy import GeoAnchor, GeoPoint
from safenav.mapbuild import LandUse, WeightConfig, class_to_weights, load_weight_map, save_weight_map
from safenav.simulator import CameraConfig, Scenario

DEFAULT_CENTER = GeoPoint(39.7800, -84.0900)


@dataclass(frozen=True)
class CitySpec:
    width_px: int = 120
    height_px: int = 120
    gsd: float = 2.0
    block_px: int = 20
    road_px: int = 5
    margin_px: int = 2
    park_fraction: float = 0.2
    n_objects: int = 150
    speed_range: tuple[float, float] = (8.0, 14.0)
    object_width_m: float = 2.0
    object_length_m: float = 4.5
    fps: float = 10.0
    duration_s: float = 200.0
    velocities: tuple[float, ...] = (5.0, 8.0, 11.0)
    route: str = "diagonal"
    center: GeoPoint = DEFAULT_CENTER
    # adversarial traffic: cars per (lane crossing, velocity) timed to meet a straight flight
    crossing_cars: int = 0
    crossing_jitter_s: float = 0.5

    def __post_init__(self) -> None:
        if self.width_px < 8 or self.height_px < 8:
            raise ScenarioError("map too small")
        if self.block_px < 1 or self.road_px < 2 or not self.gsd > 0:
            raise ScenarioError("block, road and gsd must be positive (roads at least 2 px)")
        if not 0 <= 2 * self.margin_px < self.block_px:
            raise ScenarioError("margin must leave room for a building")
        if self.n_objects < 0 or not 0 < self.speed_range[0] <= self.speed_range[1]:
            raise ScenarioError("invalid object count or speed range")
        if not self.fps > 0 or not self.duration_s > 0:
            raise ScenarioError("fps and duration must be positive")
        if self.crossing_cars < 0 or self.crossing_jitter_s < 0:
            raise ScenarioError("crossing traffic settings must be non-negative")
        if self.route not in ("diagonal", "anti-diagonal", "horizontal", "vertical"):
            raise ScenarioError(f"unknown route {self.route!r}")

    @property
    def period_px(self) -> int:
        return self.block_px + self.road_px

    @property
    def offset_px(self) -> int:
        return self.block_px // 2


def road_bands(length: int, spec: CitySpec) -> list[int]:
    """First pixel of every road band along one axis."""
    return list(range(spec.offset_px, length - spec.road_px + 1, spec.period_px))


def city_classes(spec: CitySpec, rng: np.random.Generator) -> np.ndarray:
    h, w = spec.height_px, spec.width_px
    classes = np.full((h, w), LandUse.NEUTRAL, dtype=np.uint8)
    rows, cols = road_bands(h, spec), road_bands(w, spec)
    # block edges along each axis: spans between consecutive roads (and map edges)
    def spans(bands, length):
        edges = [0] + [b + spec.road_px for b in bands]
        ends = bands + [length]
        return list(zip(edges, ends))

    for y0, y1 in spans(rows, h):
        for x0, x1 in spans(cols, w):
            if rng.random() < spec.park_fraction:
                continue
            m = spec.margin_px
            if x1 - x0 > 2 * m and y1 - y0 > 2 * m:
                classes[y0 + m : y1 - m, x0 + m : x1 - m] = LandUse.SAFE
    for y in rows:
        classes[y : y + spec.road_px, :] = LandUse.DANGER
    for x in cols:
        classes[:, x : x + spec.road_px] = LandUse.DANGER
    return classes


def _lanes(spec: CitySpec) -> list[tuple[str, float, int]]:
    """(axis, lane centre, direction) for both lanes of every road."""
    lanes = []
    for axis, length in (("h", spec.height_px), ("v", spec.width_px)):
        for b in road_bands(length, spec):
            lanes.append((axis, b + spec.road_px * 0.25, +1))
            lanes.append((axis, b + spec.road_px * 0.75, -1))
    return lanes


def _lane_track(oid, axis, lane, direction, speed, entry, spec, frames_total):
    """Constant-speed track entering its lane's upstream map edge at frame ``entry``."""
    step = speed / (spec.fps * spec.gsd) * direction
    extent = (spec.width_px if axis == "h" else spec.height_px) - 1
    traverse = int(math.ceil(extent / abs(step)))
    frames = np.arange(max(entry, 0), min(entry + traverse + 1, frames_total))
    along = (0.0 if direction > 0 else float(extent)) + (frames - entry) * step
    keep = (along >= 0) & (along <= extent)
    frames, along = frames[keep], along[keep]
    if len(frames) == 0:
        return None
    across = np.full(len(frames), lane)
    xs, ys = (along, across) if axis == "h" else (across, along)
    n = len(frames)
    return ObjectTrack(
        oid, frames, xs, ys, np.full(n, spec.object_width_m / spec.gsd), np.full(n, spec.object_length_m / spec.gsd)
    )


def car_tracks(spec: CitySpec, rng: np.random.Generator, route=None) -> list[ObjectTrack]:
    """Background traffic plus, when ``route`` is given, cars crossing it on cue.

    ``route`` is the straight flight's ``(start, goal)`` in pixels.  For every
    lane the segment crosses and every suite velocity, ``crossing_cars`` cars
    are timed to reach the crossing point when a UAV flying the segment would,
    give or take ``crossing_jitter_s``.
    """
    lanes = _lanes(spec)
    if (spec.n_objects or spec.crossing_cars) and not lanes:
        raise ScenarioError("map has no roads to put objects on")
    frames_total = int(round(spec.duration_s * spec.fps))
    tracks = []
    for oid in range(spec.n_objects):
        axis, lane, direction = lanes[int(rng.integers(len(lanes)))]
        speed = float(rng.uniform(*spec.speed_range))
        extent = (spec.width_px if axis == "h" else spec.height_px) - 1
        traverse = int(math.ceil(extent * spec.fps * spec.gsd / speed))
        entry = int(rng.integers(-traverse, frames_total))
        t = _lane_track(oid, axis, lane, direction, speed, entry, spec, frames_total)
        if t is not None:
            tracks.append(t)
    if route is None or not spec.crossing_cars:
        return tracks
    (sx, sy), (gx, gy) = route
    length = math.hypot(gx - sx, gy - sy)
    oid = spec.n_objects
    for axis, lane, direction in lanes:
        a, b = (sy, gy) if axis == "h" else (sx, gx)
        if a == b or not min(a, b) <= lane <= max(a, b):
            continue
        u = (lane - a) / (b - a)
        cross_along = (sx + u * (gx - sx)) if axis == "h" else (sy + u * (gy - sy))
        extent = (spec.width_px if axis == "h" else spec.height_px) - 1
        upstream = cross_along if direction > 0 else extent - cross_along
        for v in spec.velocities:
            for _ in range(spec.crossing_cars):
                speed = float(rng.uniform(*spec.speed_range))
                arrive_s = u * length * spec.gsd / v + float(rng.uniform(-1, 1)) * spec.crossing_jitter_s
                entry = int(round((arrive_s - upstream * spec.gsd / speed) * spec.fps))
                t = _lane_track(oid, axis, lane, direction, speed, entry, spec, frames_total)
                oid += 1
                if t is not None:
                    tracks.append(t)
    return tracks


def _block_center_near(spec: CitySpec, classes: np.ndarray, fx: float, fy: float) -> tuple[int, int]:
    """Centre of the block closest to the fractional map position (fx, fy)."""
    def centres(length):
        bands = road_bands(length, spec)
        edges = [0] + [b + spec.road_px for b in bands]
        ends = bands + [length]
        return [(a + b - 1) // 2 for a, b in zip(edges, ends)]

    xs, ys = centres(spec.width_px), centres(spec.height_px)
    x = min(xs, key=lambda c: abs(c - fx * (spec.width_px - 1)))
    y = min(ys, key=lambda c: abs(c - fy * (spec.height_px - 1)))
    return x, y


ROUTES = {
    "diagonal": ((0.0, 0.0), (1.0, 1.0)),
    "anti-diagonal": ((1.0, 0.0), (0.0, 1.0)),
    "horizontal": ((0.0, 0.5), (1.0, 0.5)),
    "vertical": ((0.5, 0.0), (0.5, 1.0)),
}


def generate_scenario(seed: int, spec: CitySpec | None = None, name: str | None = None, **overrides) -> Scenario:
    """Synthetic city, traffic and mission endpoints, fully determined by ``seed``."""
    spec = spec or CitySpec()
    rng = np.random.default_rng(seed)
    classes = city_classes(spec, rng)
    road_cells = int((classes == LandUse.DANGER).sum())
    if spec.n_objects > road_cells:
        raise ScenarioError(f"{spec.n_objects} objects do not fit on {road_cells} road cells")
    wm = class_to_weights(classes, WeightConfig(), GeoAnchor(spec.center, spec.gsd))
    (sx, sy), (gx, gy) = ROUTES[spec.route]
    start = _block_center_near(spec, classes, sx, sy)
    goal = _block_center_near(spec, classes, gx, gy)
    tracks = car_tracks(spec, rng, route=(start, goal))
    return Scenario(
        weight_map=wm,
        start=wm.cell_to_gps(start),
        goal=wm.cell_to_gps(goal),
        tracks=tracks,
        fps=spec.fps,
        velocities=tuple(spec.velocities),
        seed=seed,
        name=name or f"city-{seed}",
        **overrides,
    )


# --------------------------------------------------------------------------
# Bundled suite: four crossing-traffic cities, each flown at 5, 8 and 11 m/s.
# Every city adds one car per (crossed lane, velocity) timed to meet the straight flight.


@dataclass(frozen=True)
class SuiteEntry:
    name: str
    seed: int
    spec: CitySpec = field(default_factory=CitySpec)


BUNDLED_CITIES = (
    SuiteEntry("downtown", 11, CitySpec(route="diagonal", crossing_cars=1)),
    SuiteEntry("crosstown", 23, CitySpec(route="anti-diagonal", crossing_cars=1)),
    SuiteEntry("avenue", 37, CitySpec(route="horizontal", crossing_cars=1)),
    SuiteEntry("boulevard", 41, CitySpec(route="vertical", crossing_cars=1)),
)
HEADLINE = ("downtown", 8.0)
SUITE_VELOCITIES = (5.0, 8.0, 11.0)


def bundled_scenario(name: str) -> Scenario:
    for entry in BUNDLED_CITIES:
        if entry.name == name:
            return generate_scenario(entry.seed, entry.spec, name=entry.name)
    raise KeyError(f"no bundled scenario named {name!r}; have {[e.name for e in BUNDLED_CITIES]}")


def bundled_suite() -> list[tuple[Scenario, float]]:
    """The twelve (scenario, velocity) missions of the bundled suite."""
    return [(bundled_scenario(e.name), v) for e in BUNDLED_CITIES for v in SUITE_VELOCITIES]


# --------------------------------------------------------------------------
# Scenario files


def save_scenario(scenario: Scenario, directory, stem: str | None = None) -> Path:
    """Write ``<stem>.json`` with its weight-map pair and track CSV alongside."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or scenario.name
    save_weight_map(scenario.weight_map, directory / f"{stem}_map")
    write_tracks_csv(scenario.tracks, directory / f"{stem}_tracks.csv")
    doc = {
        "name": scenario.name,
        "map_ref": f"{stem}_map",
        "start": {"lat": scenario.start.lat, "lon": scenario.start.lon},
        "goal": {"lat": scenario.goal.lat, "lon": scenario.goal.lon},
        "fps": scenario.fps,
        "velocities": list(scenario.velocities),
        "mode": scenario.mode,
        "tracks_csv_path": f"{stem}_tracks.csv",
        "alpha": scenario.alpha,
        "seed": scenario.seed,
    }
    if scenario.camera != CameraConfig():
        doc["camera"] = asdict(scenario.camera)
    if scenario.inflation != InflationConfig():
        doc["inflation"] = asdict(scenario.inflation)
    path = directory / f"{stem}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    required = ("map_ref", "start", "goal", "fps", "velocities", "mode", "tracks_csv_path", "alpha", "seed")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ScenarioError(f"{path}: missing keys {missing}")
    base = path.parent
    try:
        scenario = Scenario(
            weight_map=load_weight_map(base / doc["map_ref"]),
            start=GeoPoint(doc["start"]["lat"], doc["start"]["lon"]),
            goal=GeoPoint(doc["goal"]["lat"], doc["goal"]["lon"]),
            tracks=read_tracks_csv(base / doc["tracks_csv_path"]),
            fps=float(doc["fps"]),
            velocities=tuple(float(v) for v in doc["velocities"]),
            mode=doc["mode"],
            alpha=float(doc["alpha"]),
            seed=int(doc["seed"]),
            name=doc.get("name", path.stem),
            camera=CameraConfig(**doc.get("camera", {})),
            inflation=InflationConfig(**doc.get("inflation", {})),
        )
    except (TypeError, KeyError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"{path}: {exc}") from exc
    scenario.validate()
    return scenario
