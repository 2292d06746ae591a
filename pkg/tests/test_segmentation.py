import math

import numpy as np
import pytest

from lotloc.segmentation import PointCluster, SegmentationParams, adaptive_radius, segment

from oracles import brute_force_dbscan

DEG = math.pi / 180.0


def labels_from_segments(n, clusters, outliers):
    labels = [-1] * n
    for k, cluster in enumerate(clusters):
        for i in cluster.indices:
            labels[i] = k
    assert sorted(outliers + [i for c in clusters for i in c.indices]) == list(range(n))
    return labels


def random_instance(rng, n_max=200):
    """Blobs plus uniform scatter, roughly scan-like scales."""
    blobs = rng.integers(1, 5)
    pts = []
    for _ in range(blobs):
        center = rng.uniform(-10, 10, 2)
        count = rng.integers(5, 40)
        pts.append(center + rng.normal(0, 0.15, (count, 2)))
    scatter = rng.uniform(-12, 12, (rng.integers(3, 25), 2))
    pts.append(scatter)
    xy = np.concatenate(pts)[:n_max]
    perm = rng.permutation(xy.shape[0])
    return xy[perm]


class TestAdaptiveRadius:
    def test_scale_zero_gives_base(self):
        params = SegmentationParams(radius_scale=0.0)
        for r in (0.5, 5.0, 29.0):
            assert adaptive_radius(r, params) == params.base_radius

    def test_formula_value(self):
        # 0.1 + 3 * 20 * 0.25 deg in radians
        params = SegmentationParams(base_radius=0.1, radius_scale=3.0, max_radius=1.0,
                                    angular_step=0.25 * DEG)
        expected = 0.1 + 3.0 * 20.0 * 0.25 * DEG
        assert adaptive_radius(20.0, params) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.3618, abs=1e-4)

    def test_clamped_at_max(self):
        params = SegmentationParams()
        assert adaptive_radius(1000.0, params) == params.max_radius

    def test_monotone_in_range(self, rng):
        params = SegmentationParams()
        r = np.sort(rng.uniform(0.1, 40, 100))
        out = adaptive_radius(r, params)
        assert np.all(np.diff(out) >= 0)


class TestSegment:
    def test_empty_input(self):
        clusters, outliers = segment(np.empty((0, 2)), np.empty(0), SegmentationParams())
        assert clusters == [] and outliers == []

    def test_isolated_point_is_outlier(self, rng):
        blob = rng.normal(0, 0.05, (20, 2))
        lone = np.array([[50.0, 50.0]])
        xy = np.concatenate([blob, lone])
        clusters, outliers = segment(xy, np.full(len(xy), 5.0), SegmentationParams())
        assert 20 in outliers

    def test_two_blobs_two_clusters(self, rng):
        a = rng.normal(0, 0.08, (20, 2))
        b = rng.normal(0, 0.08, (20, 2)) + np.array([8.0, 0.0])
        xy = np.concatenate([a, b])
        params = SegmentationParams(min_pts=4, base_radius=0.3, radius_scale=0.0,
                                    max_radius=0.3, min_cluster_size=8)
        clusters, outliers = segment(xy, np.full(40, 5.0), params)
        assert len(clusters) == 2
        assert sorted(len(c) for c in clusters) == [20, 20]
        assert outliers == []

    def test_indices_strictly_increasing(self, rng):
        xy = random_instance(rng)
        clusters, _ = segment(xy, np.linalg.norm(xy, axis=1), SegmentationParams())
        for c in clusters:
            assert list(c.indices) == sorted(c.indices)
            assert set(c.core_indices) <= set(c.indices)

    def test_scan_arcs_and_singles(self, rng):
        """Dense arcs become clusters with core interiors; scattered
        singles are outliers."""
        theta = np.linspace(0.1, 0.5, 40)
        arc1 = np.column_stack([6.0 * np.cos(theta), 6.0 * np.sin(theta)])
        theta2 = np.linspace(2.0, 2.3, 30)
        arc2 = np.column_stack([9.0 * np.cos(theta2), 9.0 * np.sin(theta2)])
        singles = np.array([[2.0, -4.0], [-5.0, -5.0], [12.0, 9.0]])
        xy = np.concatenate([arc1, arc2, singles])
        params = SegmentationParams(min_pts=4)
        clusters, outliers = segment(xy, np.linalg.norm(xy, axis=1), params)
        assert len(clusters) == 2
        assert set(outliers) == {70, 71, 72}
        for cluster in clusters:
            interior = set(cluster.indices) - {cluster.indices[0], cluster.indices[-1]}
            # interior arc points see neighbors on both sides: core
            assert interior <= set(cluster.core_indices)

    def test_oracle_equivalence(self):
        rng = np.random.default_rng(777)
        params = SegmentationParams(min_pts=4, base_radius=0.25, radius_scale=3.0,
                                    max_radius=0.6, min_cluster_size=5)
        for trial in range(100):
            xy = random_instance(rng)
            ranges = np.linalg.norm(xy, axis=1)
            radii = adaptive_radius(ranges, params)
            clusters, outliers = segment(xy, ranges, params)
            labels = labels_from_segments(len(xy), clusters, outliers)
            oracle_labels, oracle_core = brute_force_dbscan(
                xy, np.asarray(radii), params.min_pts, params.min_cluster_size
            )
            got_core = sorted(i for c in clusters for i in c.core_indices)
            want_core = sorted(
                i for i in range(len(xy)) if oracle_core[i] and oracle_labels[i] >= 0
            )
            assert labels == oracle_labels, f"trial {trial}: labels differ"
            assert got_core == want_core, f"trial {trial}: core sets differ"

    def test_permutation_invariance_of_cores_and_count(self, rng):
        params = SegmentationParams(min_pts=4, base_radius=0.3, radius_scale=1.0,
                                    max_radius=0.6, min_cluster_size=4)
        for _ in range(10):
            xy = random_instance(rng)
            ranges = np.linalg.norm(xy, axis=1)
            clusters, _ = segment(xy, ranges, params)
            cores = sorted(i for c in clusters for i in c.core_indices)

            perm = rng.permutation(len(xy))
            clusters_p, _ = segment(xy[perm], ranges[perm], params)
            cores_p = sorted(perm[i] for c in clusters_p for i in c.core_indices)
            assert len(clusters_p) == len(clusters)
            assert cores_p == cores

    def test_monotone_in_base_radius(self, rng):
        """Growing the radius never orphans a clustered point nor splits
        clusters, on blob-plus-noise instances."""
        params0 = SegmentationParams(min_pts=3, base_radius=0.2, radius_scale=0.0,
                                     max_radius=5.0, min_cluster_size=3)
        xy = random_instance(rng)
        ranges = np.linalg.norm(xy, axis=1)
        prev_clustered: set[int] = set()
        prev_count = None
        for base in (0.2, 0.35, 0.5, 0.8, 1.2, 2.0):
            params = SegmentationParams(min_pts=3, base_radius=base, radius_scale=0.0,
                                        max_radius=5.0, min_cluster_size=3)
            clusters, _ = segment(xy, ranges, params)
            clustered = {i for c in clusters for i in c.indices}
            assert prev_clustered <= clustered
            if prev_count is not None and prev_clustered == clustered:
                assert len(clusters) <= prev_count
            prev_clustered, prev_count = clustered, len(clusters)

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError):
            segment(np.zeros((3, 2)), np.zeros(2), SegmentationParams())


class TestParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            SegmentationParams(min_pts=1)
        with pytest.raises(ValueError):
            SegmentationParams(base_radius=0.0)
        with pytest.raises(ValueError):
            SegmentationParams(max_radius=0.01)
        with pytest.raises(ValueError):
            SegmentationParams(radius_scale=-1.0)
