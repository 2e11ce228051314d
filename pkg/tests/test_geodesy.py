import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from safenav.errors import DomainError, OutOfSpanError, PoleError
from safenav.geodesy import (
    GeoAnchor,
    GeoPoint,
    PixelOffset,
    SensorPose,
    gps_to_pixel_offset,
    local_east_north,
    pixel_offset_to_gps,
    rotation_x,
    rotation_y,
    rotation_z,
    sensor_model_factors,
    sensor_model_matrix,
    translation,
)

# Evaluated with mpmath at 40 significant digits before the implementation existed.
LAT_1000PX_SOUTH = -0.0007950002996576674726
LON_1000PX_EAST_AT_45 = 0.001124300205902624137
GSD = 0.0884


def test_zero_offset_is_identity():
    anchor = GeoAnchor(GeoPoint(12.5, -45.25), 0.3)
    assert pixel_offset_to_gps(anchor, (0, 0)) == anchor.center
    assert gps_to_pixel_offset(anchor, anchor.center) == PixelOffset(0.0, 0.0)


def test_southward_offset_matches_oracle():
    p = pixel_offset_to_gps(GeoAnchor(GeoPoint(0, 0), GSD), (0, 1000))
    assert p.lat == pytest.approx(LAT_1000PX_SOUTH, abs=1e-15)
    assert p.lon == 0.0


def test_eastward_offset_matches_oracle():
    p = pixel_offset_to_gps(GeoAnchor(GeoPoint(45, 0), GSD), (1000, 0))
    assert p.lon == pytest.approx(LON_1000PX_EAST_AT_45, abs=1e-15)
    assert p.lat == 45.0


def test_inverse_of_oracle_point():
    anchor = GeoAnchor(GeoPoint(0, 0), GSD)
    off = gps_to_pixel_offset(anchor, GeoPoint(LAT_1000PX_SOUTH, 0.0))
    assert off.dx == 0.0
    assert off.dy == pytest.approx(1000.0, abs=1e-6)


@settings(max_examples=300, deadline=None)
@given(
    lat=st.floats(-60, 60),
    lon=st.floats(-170, 170),
    gsd=st.floats(0.01, 5.0),
    dx=st.floats(-4096, 4096),
    dy=st.floats(-4096, 4096),
)
def test_round_trip(lat, lon, gsd, dx, dy):
    anchor = GeoAnchor(GeoPoint(lat, lon), gsd)
    back = gps_to_pixel_offset(anchor, pixel_offset_to_gps(anchor, (dx, dy)))
    assert back.dx == pytest.approx(dx, abs=1e-6)
    assert back.dy == pytest.approx(dy, abs=1e-6)


def test_pole_anchor_rejected():
    with pytest.raises(PoleError):
        pixel_offset_to_gps(GeoAnchor(GeoPoint(89.95, 0), 1.0), (1, 1))
    with pytest.raises(PoleError):
        gps_to_pixel_offset(GeoAnchor(GeoPoint(-90, 0), 1.0), GeoPoint(0, 0))


def test_asin_domain_violation():
    anchor = GeoAnchor(GeoPoint(0, 0), 1000.0)
    with pytest.raises(DomainError):
        pixel_offset_to_gps(anchor, (0, 7_000))


def test_offset_leaving_coordinate_range():
    anchor = GeoAnchor(GeoPoint(80, 0), 1000.0)
    with pytest.raises(DomainError):
        pixel_offset_to_gps(anchor, (0, -2_000))


def test_unreachable_target():
    anchor = GeoAnchor(GeoPoint(0, 0), 1.0)
    with pytest.raises(OutOfSpanError):
        gps_to_pixel_offset(anchor, GeoPoint(0, 120))


def test_invalid_types():
    with pytest.raises(ValueError):
        GeoPoint(91, 0)
    with pytest.raises(ValueError):
        GeoAnchor(GeoPoint(0, 0), 0.0)
    with pytest.raises(ValueError):
        SensorPose(0, 0, altitude=0)


def test_local_east_north_signs():
    origin = GeoPoint(40, -84)
    east, north = local_east_north(origin, GeoPoint(40.001, -83.999))
    assert east > 0 and north > 0
    assert north == pytest.approx(6_371_000 * math.sin(math.radians(0.001)), rel=1e-9)


def test_sensor_identity_pose_is_pure_translation():
    pose = SensorPose(39.78, -84.09, altitude=50.0)
    m = sensor_model_matrix(pose)
    expected = np.eye(4)
    expected[:3, 3] = (0, 0, -50)
    np.testing.assert_allclose(m, expected, atol=1e-12)
    # an explicit local origin puts the vehicle's east/north offset into T
    origin = GeoPoint(39.7799, -84.0901)
    e, n = local_east_north(origin, GeoPoint(pose.lat, pose.lon))
    m = sensor_model_matrix(pose, origin)
    np.testing.assert_allclose(m[:3, 3], (-e, -n, -50), atol=1e-9)


def test_heading_rotates_about_vertical():
    m = sensor_model_matrix(SensorPose(0, 0, 10.0, heading=math.pi / 2))
    v = m[:3, :3] @ np.array([1.0, 0.0, 0.0])
    np.testing.assert_allclose(v, [0, 1, 0], atol=1e-12)
    assert np.linalg.norm(v) == pytest.approx(1.0)


def test_matrix_is_product_of_independently_built_factors():
    pose = SensorPose(10, 20, 75.0, elevation_angle=0.3, scan_angle=-0.7, pitch=0.11, roll=-0.05, heading=2.2)

    def rx(a):
        c, s = math.cos(a), math.sin(a)
        return np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]])

    def ry(a):
        c, s = math.cos(a), math.sin(a)
        return np.array([[c, 0, s, 0], [0, 1, 0, 0], [-s, 0, c, 0], [0, 0, 0, 1]])

    def rz(a):
        c, s = math.cos(a), math.sin(a)
        return np.array([[c, -s, 0, 0], [s, c, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])

    t = np.eye(4)
    t[2, 3] = -75.0
    expected = ry(0.3) @ rz(-0.7) @ ry(0.11) @ rx(-0.05) @ rz(2.2) @ t
    np.testing.assert_allclose(sensor_model_matrix(pose), expected, atol=1e-12)
    factors = sensor_model_factors(pose)
    assert len(factors) == 6
    for f in factors[:5]:
        np.testing.assert_allclose(f[:3, :3] @ f[:3, :3].T, np.eye(3), atol=1e-12)
        assert np.linalg.det(f[:3, :3]) == pytest.approx(1.0)


def test_building_blocks():
    np.testing.assert_allclose(rotation_x(0) @ rotation_y(0) @ rotation_z(0), np.eye(4))
    np.testing.assert_allclose(translation(1, 2, 3) @ [0, 0, 0, 1], [1, 2, 3, 1])
