import json
import math
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import uniform_map
from safenav.errors import ScenarioError
from safenav.dynamics import ObjectTrack
from safenav.motion import Polyline, UavState
from safenav.scenario import CitySpec, generate_scenario
from safenav.simulator import (
    CameraConfig,
    Encounter,
    MissionReport,
    Rect,
    Scenario,
    danger_area,
    distance_histogram,
    fov_region,
    histogram_csv,
    parse_histogram_csv,
    run_all,
    run_mission,
    safety_cost,
    safety_terms,
    step_uav,
    visible_objects,
)

# e^-1 + e^-2 + e^-3, evaluated with mpmath at 40 digits
EXP_123 = 0.5530017927759189565
FOV_HALF_WIDTH_PX = 643.8213311595182  # 50 m * tan(48.70 deg) at 0.0884 m/px


def still(oid, x, y, frames=3):
    return ObjectTrack(oid, range(frames), [x] * frames, [y] * frames, [2.0] * frames, [4.0] * frames)


@pytest.fixture(scope="module")
def small_city():
    spec = CitySpec(width_px=60, height_px=60, n_objects=40, crossing_cars=1, duration_s=60, velocities=(8.0,))
    return generate_scenario(5, spec)


# ---- kinematics and geometry


def test_step_size():
    line = Polyline([(0, 0), (5000, 0)])
    s = step_uav(UavState((0.0, 0.0), 0.0, 8.84, math.pi / 2), line, 10, 0.0884)
    assert s.progress_px == pytest.approx(10.0)
    assert s.position == pytest.approx((10.0, 0.0))


def test_hundred_steps_accumulate():
    line = Polyline([(0, 0), (600, 0), (600, 900)])
    state = UavState((0.0, 0.0), 0.0, 8.84, math.pi / 2)
    total = 0.0
    for _ in range(100):
        nxt = step_uav(state, line, 10, 0.0884)
        total += math.hypot(nxt.position[0] - state.position[0], nxt.position[1] - state.position[1])
        state = nxt
    assert state.progress_px == pytest.approx(1000.0)
    assert state.position == pytest.approx((600.0, 400.0))
    # the corner step cuts across, so the chord sum is slightly shorter than the arc
    assert total <= 1000.0 + 1e-9


def test_overshoot_clamps_to_goal():
    line = Polyline([(0, 0), (3, 4)])
    s = step_uav(UavState((0.0, 0.0), 0.0, 15.0), line, 1, 0.1)
    assert s.position == (3.0, 4.0)
    assert s.progress_px == line.length


def test_fov_half_width():
    r = fov_region(UavState((0.0, 0.0), 0.0, 5.0), CameraConfig(), 0.0884)
    assert r.width / 2 == pytest.approx(FOV_HALF_WIDTH_PX, rel=1e-12)
    assert r.width / r.height == pytest.approx(1288 / 964)


def test_fov_scales_with_altitude_and_degenerates():
    s = UavState((10.0, 10.0), 0.0, 5.0)
    a = fov_region(s, CameraConfig(altitude_m=40), 1.0)
    b = fov_region(s, CameraConfig(altitude_m=80), 1.0)
    assert b.width == pytest.approx(2 * a.width, rel=1e-15)
    assert fov_region(s, CameraConfig(hfov_deg=0), 1.0).empty


def test_danger_area():
    a = danger_area(UavState((0.0, 0.0), 0.0, 5.0), 0.5)
    assert a.x1 * 0.5 == pytest.approx(25.0)
    assert danger_area(UavState((0.0, 0.0), 0.0, 0.0), 0.5).empty
    widths = [danger_area(UavState((0.0, 0.0), 0.0, v), 1.0).width for v in (5, 8, 11)]
    assert widths == [50.0, 80.0, 110.0]


def test_visible_objects():
    fov = Rect(0, 0, 100, 50)
    inside = [still(1, 10, 10), still(2, 100, 50), still(3, 0, 25)]
    outside = [still(4, 101, 10), still(5, 50, -0.5)]
    got = visible_objects(fov, inside + outside, 1, 1.0, 10)
    assert sorted(t.object_id for t, _ in got) == [1, 2, 3]
    for t, s in got:
        assert fov.contains(*s.position)
    assert visible_objects(fov, [], 0, 1.0, 10) == []
    assert visible_objects(fov, inside, 9, 1.0, 10) == []


# ---- safety cost


def test_safety_cost_oracle():
    assert safety_cost([1.0, 2.0, 3.0]) == pytest.approx(EXP_123, abs=1e-15)
    assert safety_cost([0.0], alpha=2.5) == 2.5
    assert safety_cost([1e6]) == 0.0
    assert safety_cost([]) == 0.0
    with pytest.raises(ValueError):
        safety_cost([-1.0])


@settings(max_examples=100, deadline=None)
@given(a=st.lists(st.floats(0, 30), max_size=40), b=st.lists(st.floats(0, 30), max_size=40))
def test_cost_of_concatenation_is_exact_sum(a, b):
    exact = sum((Fraction(t) for t in safety_terms(a) + safety_terms(b)), Fraction(0))
    assert safety_cost(a + b) == float(exact)
    assert safety_cost(a + b) == pytest.approx(safety_cost(a) + safety_cost(b), rel=1e-15, abs=1e-300)


@settings(max_examples=100, deadline=None)
@given(log=st.lists(st.floats(0, 10), min_size=1, max_size=40), k=st.integers(0, 39), closer=st.floats(1e-3, 1))
def test_closer_observation_costs_more(log, k, closer):
    k %= len(log)
    assume(log[k] >= closer)
    moved = list(log)
    moved[k] = log[k] - closer
    assert safety_cost(moved) > safety_cost(log)


def test_histogram_bins():
    log = [0.0, 0.99, 1.0, 9.99, 10.0, 3.5, Encounter(0, 1, 3.2)]
    assert distance_histogram(log) == [2, 1, 0, 2, 0, 0, 0, 0, 0, 1]
    assert parse_histogram_csv(histogram_csv([1, 2, 3])) == [1, 2, 3]


# ---- missions


def test_no_objects_costs_nothing(small_city):
    empty = Scenario(small_city.weight_map, small_city.start, small_city.goal, [], velocities=(8.0,))
    for mode in ("straight", "static", "dynamic"):
        r = run_mission(empty, mode)
        assert r.safety_cost == 0.0
        assert r.objects_seen_count == 0
        assert r.reached_goal


def test_replay_is_byte_identical(small_city):
    for mode in ("straight", "static", "dynamic"):
        a = run_mission(small_city, mode)
        b = run_mission(small_city, mode)
        assert a.to_json() == b.to_json()
        assert a.digest() == b.digest()


def test_report_cost_matches_log(small_city):
    r = run_mission(small_city, "dynamic")
    assert r.safety_cost == safety_cost(r.encounters, r.alpha)
    assert r.objects_seen_count == len(r.encounters)
    assert r.distinct_objects <= r.objects_seen_count
    assert sum(r.histogram) == sum(e.distance_m < 10 for e in r.encounters)


def test_flight_time_consistency(small_city):
    for (mode, v), r in run_all(small_city).items():
        assert r.reached_goal
        assert abs(r.flight_time_s - r.path_length_m / v) <= 1 / small_city.fps + 1e-9


def test_straight_mode_flies_the_segment(small_city):
    r = run_mission(small_city, "straight")
    assert r.path_length_m == pytest.approx(r.straight_length_m)
    assert r.replans == 0


def test_report_json_round_trip(small_city, tmp_path):
    r = run_mission(small_city, "static")
    doc = json.loads(r.to_json())
    assert MissionReport.from_dict(doc).to_json() == r.to_json()
    assert {"safety_cost", "objects_seen_count", "histogram", "encounters"} <= set(doc)


def test_invalid_scenarios_rejected(small_city):
    wm = uniform_map(10, 10)
    with pytest.raises(ScenarioError):
        run_mission(Scenario(wm, wm.cell_to_gps((1, 1)), wm.cell_to_gps((1, 1)), []))
    with pytest.raises(ScenarioError):
        run_mission(small_city, "sideways")
    with pytest.raises(ScenarioError):
        run_mission(small_city, "static", velocity=30.0)
