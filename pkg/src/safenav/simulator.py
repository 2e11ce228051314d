"""Frame-by-frame mission replay and safety scoring.

The UAV flies one of three routes through a scenario replayed from ground-truth
tracks: the straight start-goal segment, the static weighted path, or the
static path adapted in flight around the objects its camera sees.  Every
object inside the camera footprint is logged with its ground distance each
frame; the safety cost sums ``alpha * exp(-distance)`` over that log.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from safenav.dynamics import (
    InflationConfig,
    ObjectTrack,
    apply_dynamic_costs,
    estimate_object_state,
    gaussian_multiplier_field,
    placement_locations,
    predict_collision,
    replan,
)
from safenav.errors import ScenarioError
from safenav.geodesy import GeoPoint
from safenav.motion import Polyline, UavState
from safenav.planner import plan_path
from safenav.waypoints import MAX_VELOCITY_MPS

MODES = ("straight", "static", "dynamic")
HISTOGRAM_BINS_M = 10
DANGER_HORIZON_S = 5.0


@dataclass(frozen=True)
class CameraConfig:
    hfov_deg: float = 97.40
    aspect: float = 1288 / 964
    altitude_m: float = 50.0

    def __post_init__(self) -> None:
        if not 0 <= self.hfov_deg < 180:
            raise ValueError("hfov must be in [0, 180) degrees")
        if not self.aspect > 0 or not self.altitude_m > 0:
            raise ValueError("aspect and altitude must be positive")

    def half_width_m(self) -> float:
        return self.altitude_m * math.tan(math.radians(self.hfov_deg) / 2)


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle in raster coordinates; empty if zero-sized."""

    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def empty(self) -> bool:
        return not (self.x1 > self.x0 and self.y1 > self.y0)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def contains(self, x: float, y: float) -> bool:
        return not self.empty and self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


def step_uav(state: UavState, path: Polyline, fps: float, gsd: float) -> UavState:
    """Advance ``velocity / (fps * gsd)`` pixels of arc length, stopping at the goal."""
    dp = state.velocity_mps / (fps * gsd)
    s = min(state.progress_px + dp, path.length)
    return replace(state, position=path.point_at(s), progress_px=s, heading=path.heading_at(s, state.heading))


def fov_region(state: UavState, cam: CameraConfig, gsd: float) -> Rect:
    """Ground footprint of a nadir camera, centred on the UAV."""
    hw = cam.half_width_m() / gsd
    hh = hw / cam.aspect
    x, y = state.position
    return Rect(x - hw, y - hh, x + hw, y + hh)


def danger_area(state: UavState, gsd: float, horizon_s: float = DANGER_HORIZON_S) -> Rect:
    """Square whose boundary the UAV reaches after ``horizon_s`` at constant speed."""
    half = max(state.velocity_mps, 0.0) * horizon_s / gsd
    x, y = state.position
    return Rect(x - half, y - half, x + half, y + half)


def frame_index(tracks) -> dict[int, list]:
    """``frame -> [(track, row), ...]`` for fast per-frame lookups."""
    index: dict[int, list] = {}
    for track in tracks:
        for i, f in enumerate(track.frames.tolist()):
            index.setdefault(f, []).append((track, i))
    return index


def visible_objects(fov: Rect, tracks, frame: int, gsd: float, fps: float, index=None):
    """``(track, state)`` for every object inside the footprint at ``frame``.

    ``index`` is an optional :func:`frame_index` of ``tracks``.
    """
    if index is None:
        rows = [(t, t.index_of(frame)) for t in tracks]
    else:
        rows = index.get(int(frame), [])
    out = []
    for track, i in rows:
        if i is None or not fov.contains(track.xs[i], track.ys[i]):
            continue
        out.append((track, estimate_object_state(track, frame, gsd, fps)))
    return out


@dataclass(frozen=True)
class Encounter:
    frame: int
    object_id: int
    distance_m: float
    in_danger_area: bool = False


def _distances(log):
    for item in log:
        d = item.distance_m if isinstance(item, Encounter) else float(item)
        if d < 0:
            raise ValueError(f"negative ground distance {d}")
        yield d


def safety_terms(log, alpha: float = 1.0) -> list[float]:
    return [alpha * math.exp(-d) for d in _distances(log)]


def safety_cost(log, alpha: float = 1.0) -> float:
    """``sum(alpha * exp(-d))`` over every logged observation (distances in metres)."""
    return math.fsum(safety_terms(log, alpha))


def distance_histogram(log, bins: int = HISTOGRAM_BINS_M) -> list[int]:
    """Observation counts in 1 m bins ``[k, k + 1)`` for ``k < bins``."""
    counts = [0] * bins
    for d in _distances(log):
        if d < bins:
            counts[int(d)] += 1
    return counts


@dataclass
class MissionReport:
    scenario: str
    mode: str
    velocity_mps: float
    alpha: float
    encounters: list[Encounter]
    safety_cost: float
    path_length_m: float
    straight_length_m: float
    flight_time_s: float
    frames: int
    replans: int
    reached_goal: bool
    histogram: list[int] = field(default_factory=list)

    @property
    def objects_seen_count(self) -> int:
        """Logged FOV observations: the terms the safety cost sums over."""
        return len(self.encounters)

    @property
    def distinct_objects(self) -> int:
        return len({e.object_id for e in self.encounters})

    @property
    def danger_observations(self) -> int:
        return sum(e.in_danger_area for e in self.encounters)

    @property
    def overhead_ratio(self) -> float:
        if self.straight_length_m == 0:
            return 1.0
        return self.path_length_m / self.straight_length_m

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "mode": self.mode,
            "velocity_mps": self.velocity_mps,
            "alpha": self.alpha,
            "safety_cost": self.safety_cost,
            "objects_seen_count": self.objects_seen_count,
            "distinct_objects": self.distinct_objects,
            "danger_observations": self.danger_observations,
            "path_length_m": self.path_length_m,
            "straight_length_m": self.straight_length_m,
            "flight_time_s": self.flight_time_s,
            "frames": self.frames,
            "replans": self.replans,
            "reached_goal": self.reached_goal,
            "histogram": [{"distance_bin_m": k, "count": c} for k, c in enumerate(self.histogram)],
            "encounters": [
                {"frame": e.frame, "object_id": e.object_id, "distance_m": e.distance_m, "in_danger_area": e.in_danger_area}
                for e in self.encounters
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MissionReport":
        return cls(
            scenario=doc["scenario"],
            mode=doc["mode"],
            velocity_mps=doc["velocity_mps"],
            alpha=doc["alpha"],
            encounters=[Encounter(**e) for e in doc["encounters"]],
            safety_cost=doc["safety_cost"],
            path_length_m=doc["path_length_m"],
            straight_length_m=doc["straight_length_m"],
            flight_time_s=doc["flight_time_s"],
            frames=doc["frames"],
            replans=doc["replans"],
            reached_goal=doc["reached_goal"],
            histogram=[h["count"] for h in doc["histogram"]],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def histogram_csv(histogram) -> str:
    lines = ["distance_bin_m,count"] + [f"{k},{c}" for k, c in enumerate(histogram)]
    return "\n".join(lines) + "\n"


def parse_histogram_csv(text: str) -> list[int]:
    lines = text.strip().splitlines()
    if lines[0] != "distance_bin_m,count":
        raise ValueError("bad histogram header")
    return [int(ln.split(",")[1]) for ln in lines[1:]]


@dataclass
class Scenario:
    weight_map: object
    start: GeoPoint
    goal: GeoPoint
    tracks: list[ObjectTrack]
    fps: float = 10.0
    velocities: tuple[float, ...] = (5.0, 8.0, 11.0)
    mode: str = "dynamic"
    alpha: float = 1.0
    seed: int = 0
    name: str = "scenario"
    camera: CameraConfig = field(default_factory=CameraConfig)
    inflation: InflationConfig = field(default_factory=InflationConfig)
    max_velocity_mps: float = MAX_VELOCITY_MPS

    def validate(self) -> None:
        if not self.fps > 0:
            raise ScenarioError("fps must be positive")
        if self.mode not in MODES:
            raise ScenarioError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.velocities:
            raise ScenarioError("at least one velocity is required")
        for v in self.velocities:
            if not 0 < v <= self.max_velocity_mps:
                raise ScenarioError(f"velocity {v} outside (0, {self.max_velocity_mps}]")
        wm = self.weight_map
        a, b = wm.gps_to_cell(self.start), wm.gps_to_cell(self.goal)
        if a == b:
            raise ScenarioError("start and goal fall on the same cell")
        for name, c in (("start", a), ("goal", b)):
            if not wm.contains(c):
                raise ScenarioError(f"{name} {c} lies outside the map")
        if self.alpha < 0:
            raise ScenarioError("alpha must be non-negative")


def _flight_line(cells, origin=None) -> Polyline:
    """Polyline through the path's turning points (collinear cells dropped losslessly)."""
    pts = np.asarray(cells, dtype=np.float64).reshape(-1, 2)
    if len(pts) > 2:
        step = np.diff(pts, axis=0)
        turn = np.any(step[1:] != step[:-1], axis=1)
        pts = pts[np.concatenate([[True], turn, [True]])]
    pts = [tuple(p) for p in pts.tolist()]
    if origin is not None:
        pts[0] = (float(origin[0]), float(origin[1]))
        if len(pts) == 1:
            pts.append(tuple(map(float, cells[-1])))
    return Polyline(pts)


def _field_key(visible, predictions, cfg):
    """Identity of the active fields: which objects are seen and which branch each takes."""
    return frozenset(
        (obj.object_id, pred.collides and pred.time_gap_s < cfg.delta_s)
        for (_, obj), pred in zip(visible, predictions)
    )


def run_mission(
    scenario: Scenario, mode: str | None = None, velocity: float | None = None, trace: list | None = None
) -> MissionReport:
    """Replay one flight; the result depends only on the scenario and arguments.

    When ``trace`` is a list, ``(frame, x, y)`` of the UAV is appended every frame.
    """
    mode = mode or scenario.mode
    velocity = scenario.velocities[0] if velocity is None else velocity
    scenario = replace(scenario, mode=mode, velocities=(velocity,))
    scenario.validate()
    wm = scenario.weight_map
    gsd, fps = wm.gsd, scenario.fps
    cfg, cam = scenario.inflation, scenario.camera
    start, goal = wm.gps_to_cell(scenario.start), wm.gps_to_cell(scenario.goal)
    straight_px = math.hypot(goal[0] - start[0], goal[1] - start[1])

    if mode == "straight":
        line = Polyline([start, goal])
    else:
        line = _flight_line(plan_path(wm, start, goal).cells)

    state = UavState(line.point_at(0.0), 0.0, velocity, line.heading_at(0.0))
    dp = velocity / (fps * gsd)
    # generous cap: dynamic detours can lengthen the route, never infinitely
    max_frames = int(math.ceil(20 * (straight_px + 1) / dp)) + 10
    encounters: list[Encounter] = []
    travelled_px = 0.0
    replans = 0
    active = frozenset()
    index = frame_index(scenario.tracks)
    frame = 0
    while True:
        fov = fov_region(state, cam, gsd)
        danger = danger_area(state, gsd)
        visible = visible_objects(fov, scenario.tracks, frame, gsd, fps, index)
        x, y = state.position
        if trace is not None:
            trace.append((frame, x, y))
        for track, obj in visible:
            d = math.hypot(obj.position[0] - x, obj.position[1] - y) * gsd
            encounters.append(Encounter(frame, obj.object_id, d, danger.contains(*obj.position)))
        if state.progress_px >= line.length or frame >= max_frames:
            break
        if mode == "dynamic":
            preds = [predict_collision(line, state, obj, gsd) for _, obj in visible]
            key = _field_key(visible, preds, cfg)
            if key != active:
                fields = []
                for (_, obj), pred in zip(visible, preds):
                    for loc in placement_locations(pred, obj, state, cfg, gsd, fps):
                        fields.append(gaussian_multiplier_field(obj, loc, cfg, gsd))
                new_path = replan(apply_dynamic_costs(wm, fields), state, goal)
                line = _flight_line(new_path.cells, origin=state.position)
                state = replace(state, progress_px=0.0, heading=line.heading_at(0.0, state.heading))
                replans += 1
                # the new route may flip branches; those flips are not a reason to replan again
                active = _field_key(visible, [predict_collision(line, state, obj, gsd) for _, obj in visible], cfg)
        before = state.progress_px
        state = step_uav(state, line, fps, gsd)
        travelled_px += state.progress_px - before
        frame += 1

    return MissionReport(
        scenario=scenario.name,
        mode=mode,
        velocity_mps=velocity,
        alpha=scenario.alpha,
        encounters=encounters,
        safety_cost=safety_cost(encounters, scenario.alpha),
        path_length_m=travelled_px * gsd,
        straight_length_m=straight_px * gsd,
        flight_time_s=frame / fps,
        frames=frame,
        replans=replans,
        reached_goal=state.progress_px >= line.length,
        histogram=distance_histogram(encounters),
    )


def run_all(scenario: Scenario, modes=MODES) -> dict[tuple[str, float], MissionReport]:
    """Every mode at every configured velocity, keyed by ``(mode, velocity)``."""
    return {(m, v): run_mission(scenario, m, v) for m in modes for v in scenario.velocities}


def merge_reports(reports) -> dict:
    """Totals over several runs of one mode (costs add, histograms add)."""
    reports = list(reports)
    hist = [0] * HISTOGRAM_BINS_M
    for r in reports:
        hist = [a + b for a, b in zip(hist, r.histogram)]
    return {
        "runs": len(reports),
        "safety_cost": math.fsum(t for r in reports for t in safety_terms(r.encounters, r.alpha)),
        "objects_seen_count": sum(r.objects_seen_count for r in reports),
        "distinct_objects": sum(r.distinct_objects for r in reports),
        "path_length_m": math.fsum(r.path_length_m for r in reports),
        "straight_length_m": math.fsum(r.straight_length_m for r in reports),
        "flight_time_s": math.fsum(r.flight_time_s for r in reports),
        "histogram": hist,
    }
