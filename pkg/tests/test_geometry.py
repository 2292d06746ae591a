import math

import numpy as np
import pytest

from lotloc.geometry import (
    LaserScan,
    Point2,
    Pose,
    compose,
    invert,
    normalize_angle,
    normalize_angles,
    points_to_xy,
    scan_to_points,
    scan_to_xy,
    transform_to_map,
    transform_xy,
)


def make_scan(ranges, start=0.0, step=math.pi / 2):
    return LaserScan(timestamp=0.0, start_bearing=start, angular_step=step, ranges=np.array(ranges, dtype=float))


class TestScanToPoints:
    def test_axis_cases(self):
        pts = scan_to_points(make_scan([1.0, 2.0]))
        assert pts[0] == pytest.approx((1.0, 0.0), abs=1e-15)
        assert pts[1] == pytest.approx((0.0, 2.0), abs=1e-15)

    def test_all_invalid_returns_empty(self):
        assert scan_to_points(make_scan([math.inf, math.inf, math.inf])) == []

    def test_invalid_returns_dropped_in_order(self):
        pts = scan_to_points(make_scan([1.0, math.inf, 3.0]))
        assert len(pts) == 2
        assert pts[0].x == pytest.approx(1.0)
        assert pts[1].x == pytest.approx(3.0 * math.cos(math.pi), abs=1e-12)

    def test_xy_variant_matches(self):
        scan = make_scan([1.0, math.inf, 2.5, 0.7], start=-0.3, step=0.1)
        assert np.array_equal(scan_to_xy(scan), points_to_xy(scan_to_points(scan)))


class TestTransform:
    def test_identity_pose(self):
        assert transform_to_map(Pose(0, 0, 0), Point2(1, 2)) == (1.0, 2.0)

    def test_quarter_turn_translation(self):
        # hand evaluation: R(pi/2) @ (1, 0) + (10, 5) = (10, 6)
        p = transform_to_map(Pose(10, 5, math.pi / 2), Point2(1, 0))
        assert p.x == pytest.approx(10.0, abs=1e-12)
        assert p.y == pytest.approx(6.0, abs=1e-12)

    def test_origin_maps_to_translation(self):
        p = transform_to_map(Pose(-3.5, 7.25, 1.234), Point2(0, 0))
        assert p == (-3.5, 7.25)

    def test_isometry_on_random_sets(self, rng):
        pts = rng.normal(0, 5, (40, 2))
        pose = Pose(rng.normal(), rng.normal(), rng.uniform(-math.pi, math.pi))
        out = transform_xy(pose, pts)
        for _ in range(50):
            i, j = rng.integers(0, 40, 2)
            d0 = math.dist(pts[i], pts[j])
            d1 = math.dist(out[i], out[j])
            assert d1 == pytest.approx(d0, rel=1e-12, abs=1e-12)

    def test_zero_pose_is_identity_on_sets(self, rng):
        pts = rng.normal(0, 5, (25, 2))
        assert np.array_equal(transform_xy(Pose(0, 0, 0), pts), pts)

    def test_batch_agrees_bit_exactly_with_scalar(self, rng):
        pts = rng.normal(0, 10, (30, 2))
        pose = Pose(3.7, -1.2, 2.1)
        batch = transform_xy(pose, pts)
        for row, p in zip(batch, pts):
            scalar = transform_to_map(pose, Point2(p[0], p[1]))
            assert row[0] == scalar.x and row[1] == scalar.y


class TestNormalizeAngle:
    @pytest.mark.parametrize(
        "angle,expected",
        [(0.0, 0.0), (3 * math.pi, math.pi), (-3 * math.pi / 2, math.pi / 2),
         (math.pi, math.pi), (-math.pi, math.pi)],
    )
    def test_known_values(self, angle, expected):
        assert normalize_angle(angle) == pytest.approx(expected, abs=1e-12)

    def test_idempotent(self, rng):
        a = rng.uniform(-50, 50, 200)
        once = normalize_angles(a)
        assert np.array_equal(normalize_angles(once), once)
        assert np.all(once > -math.pi) and np.all(once <= math.pi)

    def test_congruence(self, rng):
        for a in rng.uniform(-40, 40, 100):
            r = normalize_angle(a)
            assert abs((a - r) / (2 * math.pi) - round((a - r) / (2 * math.pi))) < 1e-9


class TestPose:
    def test_normalizes_heading(self):
        assert Pose(0, 0, 3 * math.pi).psi == pytest.approx(math.pi)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Pose(math.nan, 0, 0)
        with pytest.raises(ValueError):
            Pose(0, math.inf, 0)

    def test_compose_invert_roundtrip(self, rng):
        for _ in range(20):
            a = Pose(rng.normal(), rng.normal(), rng.uniform(-3, 3))
            ident = compose(a, invert(a))
            assert ident.e == pytest.approx(0, abs=1e-12)
            assert ident.n == pytest.approx(0, abs=1e-12)
            assert ident.psi == pytest.approx(0, abs=1e-12)

    def test_compose_transforms_points_consistently(self, rng):
        a = Pose(1.0, -2.0, 0.7)
        b = Pose(0.5, 3.0, -1.1)
        p = Point2(0.3, 0.9)
        via_compose = transform_to_map(compose(a, b), p)
        via_chain = transform_to_map(a, transform_to_map(b, p))
        assert via_compose.x == pytest.approx(via_chain.x, abs=1e-12)
        assert via_compose.y == pytest.approx(via_chain.y, abs=1e-12)


class TestLaserScan:
    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            LaserScan(0.0, 0.0, 0.0, np.array([1.0]))

    def test_rejects_over_full_revolution(self):
        with pytest.raises(ValueError):
            LaserScan(0.0, 0.0, math.pi / 2, np.ones(6))
