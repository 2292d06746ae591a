import math

import numpy as np
import pytest

from lotloc.lshape import (
    DegenerateCluster,
    FittedRectangle,
    LShapeParams,
    ParallelEdges,
    closeness_score,
    extract_corner_observations,
    fit_rectangle,
    inverse_distance_sum,
    rectangle_corners,
)
from lotloc.segmentation import PointCluster

from oracles import best_theta_oracle

DEG = math.pi / 180.0


def rect_outline(w, h, spacing=0.05, rotation=0.0, offset=(0.0, 0.0)):
    """Noise-free points along the full perimeter of a rectangle."""
    pts = []
    for t in np.arange(0.0, w, spacing):
        pts.append((t, 0.0))
        pts.append((w - t, h))
    for t in np.arange(0.0, h, spacing):
        pts.append((w, t))
        pts.append((0.0, h - t))
    xy = np.asarray(pts)
    c, s = math.cos(rotation), math.sin(rotation)
    rot = xy @ np.array([[c, s], [-s, c]])
    return rot + np.asarray(offset)


def l_view(w, h, spacing=0.04, rotation=0.0, offset=(0.0, 0.0)):
    """Two visible faces of a rectangle (the L the scanner would see)."""
    pts = [(t, 0.0) for t in np.arange(0.0, w + 1e-9, spacing)]
    pts += [(0.0, t) for t in np.arange(spacing, h + 1e-9, spacing)]
    xy = np.asarray(pts)
    c, s = math.cos(rotation), math.sin(rotation)
    return xy @ np.array([[c, s], [-s, c]]) + np.asarray(offset)


def cluster_of(xy):
    xy = np.asarray(xy, dtype=float)
    return PointCluster(xy=xy, indices=tuple(range(len(xy))))


def corner_rmse(corners, truth):
    """RMSE after greedily matching each fitted corner to the nearest truth."""
    err2 = []
    for c in corners:
        d2 = min((c[0] - t[0]) ** 2 + (c[1] - t[1]) ** 2 for t in truth)
        err2.append(d2)
    return math.sqrt(sum(err2) / len(err2))


class TestInverseDistanceSum:
    def test_direct_summation(self):
        # 1/0.1 + 1/0.1 + 1/0.2 + 1/0.2 = 30
        assert inverse_distance_sum([0.1, 0.1, 0.2, 0.2], 0.01) == pytest.approx(30.0)

    def test_clamp(self):
        assert inverse_distance_sum([0.0, 0.0], 0.01) == pytest.approx(200.0)

    def test_homogeneity_without_clamp(self, rng):
        d = rng.uniform(0.05, 1.0, 30)
        full = inverse_distance_sum(d, 0.01)
        assert inverse_distance_sum(2.0 * d, 0.01) == pytest.approx(full / 2.0, rel=1e-12)


class TestClosenessScore:
    def test_all_points_on_one_boundary(self):
        # every point sits on the chosen axis-1 boundary: m / d_min
        c1 = np.zeros(6)
        c2 = np.linspace(0.0, 3.0, 6)
        assert closeness_score(c1, c2, d_min=0.01) == pytest.approx(6 / 0.01)

    def test_matches_independent_oracle(self, rng):
        from oracles import closeness_score_oracle

        for _ in range(25):
            xy = rng.normal(0, 1, (rng.integers(3, 30), 2))
            theta = rng.uniform(0, math.pi / 2)
            e1 = np.array([math.cos(theta), math.sin(theta)])
            e2 = np.array([-math.sin(theta), math.cos(theta)])
            got = closeness_score(xy @ e1, xy @ e2, 0.01)
            want = closeness_score_oracle(xy, theta, 0.01)
            assert got == pytest.approx(want, rel=1e-9)

    def test_translation_invariance(self, rng):
        xy = rng.normal(0, 1, (20, 2))
        theta = 0.3
        e1 = np.array([math.cos(theta), math.sin(theta)])
        e2 = np.array([-math.sin(theta), math.cos(theta)])
        base = closeness_score(xy @ e1, xy @ e2, 0.01)
        shifted = xy + np.array([13.7, -4.2])
        moved = closeness_score(shifted @ e1, shifted @ e2, 0.01)
        assert moved == pytest.approx(base, rel=1e-9)

    def test_rejects_mismatched_input(self):
        with pytest.raises(ValueError):
            closeness_score([1.0, 2.0], [1.0], 0.01)


class TestFitRectangle:
    def test_axis_aligned_outline_exact(self):
        params = LShapeParams()
        rect = fit_rectangle(cluster_of(rect_outline(2.0, 1.0)), params)
        assert rect.theta_star == 0.0
        want = [(0, 0), (2, 0), (2, 1), (0, 1)]
        for got, exp in zip(rect.corners, want):
            assert got == pytest.approx(exp, abs=1e-12)
        le = rect.edge_lengths()
        assert le == pytest.approx((2.0, 1.0), abs=1e-12)

    def test_rotated_outline_recovers_angle_and_corners(self):
        params = LShapeParams()
        phi = 30.0 * DEG
        xy = rect_outline(2.0, 1.0, rotation=phi, offset=(5.0, -3.0))
        rect = fit_rectangle(cluster_of(xy), params)
        dtheta = (rect.theta_star - phi + math.pi / 4) % (math.pi / 2) - math.pi / 4
        assert abs(dtheta) <= params.angle_step
        truth = np.array([(0, 0), (2, 0), (2, 1), (0, 1)])
        c, s = math.cos(phi), math.sin(phi)
        truth = truth @ np.array([[c, s], [-s, c]]) + np.array([5.0, -3.0])
        tol = math.tan(params.angle_step) * math.hypot(2, 1)
        assert corner_rmse(rect.corners, truth) <= tol

    def test_l_view_completes_rectangle(self):
        params = LShapeParams()
        phi = 17.0 * DEG
        xy = l_view(1.5, 0.9, spacing=0.05, rotation=phi, offset=(3.0, 4.0))
        rect = fit_rectangle(cluster_of(xy), params)
        truth = np.array([(0, 0), (1.5, 0), (1.5, 0.9), (0, 0.9)])
        c, s = math.cos(phi), math.sin(phi)
        truth = truth @ np.array([[c, s], [-s, c]]) + np.array([3.0, 4.0])
        assert corner_rmse(rect.corners, truth) <= 0.02

    def test_containment_on_random_clusters(self, rng):
        params = LShapeParams()
        for _ in range(20):
            xy = rng.normal(0, 1.0, (rng.integers(8, 60), 2)) * np.array([1.0, 0.4])
            rect = fit_rectangle(cluster_of(xy), params)
            for a, b, c in rect.edges[:2]:
                assert np.all(xy @ np.array([a, b]) >= c - 1e-9)
            for a, b, c in rect.edges[2:]:
                assert np.all(xy @ np.array([a, b]) <= c + 1e-9)

    def test_grid_argmax_matches_oracle(self, rng):
        params = LShapeParams(angle_step=2.0 * DEG)
        for _ in range(15):
            xy = rng.normal(0, 1.0, (rng.integers(5, 50), 2)) * np.array([1.0, 0.3])
            rect = fit_rectangle(cluster_of(xy), params)
            want = best_theta_oracle(xy, params.angle_step, params.d_min)
            assert rect.theta_star == pytest.approx(want, abs=1e-12)

    def test_rotation_equivariance(self, rng):
        params = LShapeParams()
        base = l_view(1.2, 0.8, spacing=0.03)
        rect0 = fit_rectangle(cluster_of(base), params)
        for phi in (10 * DEG, 37.5 * DEG, 61 * DEG):
            c, s = math.cos(phi), math.sin(phi)
            rect = fit_rectangle(cluster_of(base @ np.array([[c, s], [-s, c]])), params)
            dt = (rect.theta_star - rect0.theta_star - phi) % (math.pi / 2)
            dt = min(dt, math.pi / 2 - dt)
            assert dt <= params.angle_step + 1e-12

    def test_score_translation_invariant(self, rng):
        params = LShapeParams()
        xy = l_view(1.0, 0.7)
        r0 = fit_rectangle(cluster_of(xy), params)
        r1 = fit_rectangle(cluster_of(xy + np.array([40.0, -7.0])), params)
        assert r1.score == pytest.approx(r0.score, rel=1e-9)
        assert r1.theta_star == r0.theta_star

    def test_collinear_raises_degenerate(self):
        xy = np.column_stack([np.linspace(0, 2, 30), np.zeros(30)])
        with pytest.raises(DegenerateCluster):
            fit_rectangle(cluster_of(xy), LShapeParams())

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_rectangle(cluster_of(np.array([[0.0, 0.0]])), LShapeParams())


class TestRectangleCorners:
    def test_unit_square(self):
        edges = [(1, 0, 0), (0, 1, 0), (1, 0, 1), (0, 1, 1)]
        assert rectangle_corners(edges) == ((0, 0), (1, 0), (1, 1), (0, 1))

    def test_axis_lines(self):
        edges = [(1, 0, 0), (0, 1, 0), (1, 0, 3), (0, 1, 2)]
        got = rectangle_corners(edges)
        assert got == ((0, 0), (3, 0), (3, 2), (0, 2))

    def test_rotated_square_corners(self):
        phi = 30 * DEG
        c, s = math.cos(phi), math.sin(phi)
        edges = [(c, s, 0), (-s, c, 0), (c, s, 2), (-s, c, 1)]
        got = rectangle_corners(edges)
        truth = np.array([(0, 0), (2, 0), (2, 1), (0, 1)]) @ np.array([[c, s], [-s, c]])
        assert corner_rmse(got, truth) < 1e-12

    def test_parallel_edges_raise(self):
        with pytest.raises(ParallelEdges):
            rectangle_corners([(1, 0, 0), (1, 0, 1), (0, 1, 0), (0, 1, 1)])


class TestExtractCornerObservations:
    def test_empty(self):
        assert extract_corner_observations([], LShapeParams()) == []

    def test_single_pillar_gives_four_corners(self):
        obs = extract_corner_observations([cluster_of(l_view(0.6, 0.6))], LShapeParams())
        assert len(obs) == 4

    def test_sliver_dropped_by_min_edge(self, rng):
        xy = rng.normal(0, 0.02, (12, 2))  # both extents far below min_edge
        diag = {}
        obs = extract_corner_observations([cluster_of(xy)], LShapeParams(), diagnostics=diag)
        assert obs == []
        assert diag["dropped_gate"] == 1

    def test_wall_run_dropped_by_max_edge(self):
        xy = l_view(20.0, 0.5, spacing=0.2)
        obs = extract_corner_observations([cluster_of(xy)], LShapeParams())
        assert obs == []

    def test_thin_partial_wall_view_kept(self, rng):
        # a noisy straight strip: one long edge, one tiny; still a valid
        # observation of a big structure's face
        y = np.linspace(0.0, 2.4, 60)
        x = rng.normal(0.0, 0.02, 60)
        obs = extract_corner_observations([cluster_of(np.column_stack([x, y]))], LShapeParams())
        assert len(obs) == 4

    def test_degenerate_counted_not_raised(self):
        xy = np.column_stack([np.linspace(0, 1, 20), np.zeros(20)])
        diag = {}
        obs = extract_corner_observations([cluster_of(xy)], LShapeParams(), diagnostics=diag)
        assert obs == []
        assert diag["dropped_degenerate"] == 1


class TestParamsValidation:
    def test_bad_values(self):
        with pytest.raises(ValueError):
            LShapeParams(angle_step=0.0)
        with pytest.raises(ValueError):
            LShapeParams(d_min=0.0)
        with pytest.raises(ValueError):
            LShapeParams(min_edge=9.0, max_edge=8.0)
