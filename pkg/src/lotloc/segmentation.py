"""Scan segmentation: density-based clustering with a range-adaptive radius.

Clusters a scan's points into candidate objects and discards isolated
returns. Density semantics (documented here once; the tests' brute-force
oracle implements the same rules independently):

* a point's neighborhood is the closed disk of its own adaptive radius,
  and the point counts as its own neighbor;
* a point is *core* when its neighborhood holds at least ``min_pts`` points;
* two core points are linked when each lies within the other's radius
  (mutual reachability, so the core graph is symmetric and the resulting
  components are independent of input order);
* a non-core point joins the cluster of the lowest-index core point whose
  neighborhood contains it; points reachable from no core are outliers;
* clusters smaller than ``min_cluster_size`` are demoted to outliers.

Everything is a deterministic function of the input order; there is no
randomness anywhere in this module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from lotloc.geometry import Point2, points_to_xy

DEG = math.pi / 180.0


@dataclass(frozen=True)
class SegmentationParams:
    """Clustering knobs.

    The neighborhood radius grows with measured range because the gap
    between adjacent beams on a surface grows with range: ``radius_scale``
    multiplies ``range * angular_step`` (the expected beam gap), on top of
    ``base_radius``, clamped to ``max_radius``.
    """

    min_pts: int = 4
    base_radius: float = 0.1
    radius_scale: float = 3.0
    max_radius: float = 0.5
    min_cluster_size: int = 8
    angular_step: float = 0.25 * DEG

    def __post_init__(self) -> None:
        if self.min_pts < 2:
            raise ValueError("min_pts must be >= 2")
        if not self.base_radius > 0.0:
            raise ValueError("base_radius must be > 0")
        if self.radius_scale < 0.0:
            raise ValueError("radius_scale must be >= 0")
        if self.max_radius < self.base_radius:
            raise ValueError("max_radius must be >= base_radius")
        if self.min_cluster_size < 1:
            raise ValueError("min_cluster_size must be >= 1")
        if not self.angular_step > 0.0:
            raise ValueError("angular_step must be > 0")


@dataclass(frozen=True)
class PointCluster:
    """One segmented object candidate, in sensor-frame coordinates.

    ``indices`` are the strictly increasing positions of the member points
    in the input scan; ``core_indices`` is the subset that met the density
    criterion (kept for diagnostics and oracle tests).
    """

    xy: np.ndarray
    indices: tuple[int, ...]
    core_indices: tuple[int, ...] = field(default=())

    @property
    def points(self) -> list[Point2]:
        return [Point2(float(x), float(y)) for x, y in self.xy]

    def __len__(self) -> int:
        return len(self.indices)


def adaptive_radius(range_m: float | np.ndarray, params: SegmentationParams) -> float | np.ndarray:
    """Neighborhood radius for a point measured at the given range.

    clamp(base_radius + radius_scale * range * angular_step,
          base_radius, max_radius); monotone non-decreasing in range.
    """
    r = params.base_radius + params.radius_scale * np.asarray(range_m, dtype=float) * params.angular_step
    out = np.clip(r, params.base_radius, params.max_radius)
    return float(out) if np.ndim(range_m) == 0 else out


def segment(
    points: Sequence[Point2] | np.ndarray,
    per_point_range: Sequence[float] | np.ndarray,
    params: SegmentationParams,
) -> tuple[list[PointCluster], list[int]]:
    """Partition scan points into clusters and outliers.

    Returns ``(clusters, outlier_indices)``; every input index appears in
    exactly one cluster or among the outliers. Clusters are ordered by
    their smallest member index.
    """
    xy = points_to_xy(points)
    n = xy.shape[0]
    if n == 0:
        return [], []
    ranges = np.asarray(per_point_range, dtype=float)
    if ranges.shape[0] != n:
        raise ValueError("points and per_point_range must have the same length")
    radii = adaptive_radius(ranges, params)

    # All candidate neighbor pairs lie within the global clamp, so a single
    # fixed-radius pair query covers both directed adaptive conditions.
    tree = cKDTree(xy)
    pairs = tree.query_pairs(r=params.max_radius, output_type="ndarray")
    if pairs.size:
        a, b = pairs[:, 0], pairs[:, 1]
        diff = xy[a] - xy[b]
        dist = np.sqrt(diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1])
        in_a = dist <= radii[a]  # b inside a's neighborhood
        in_b = dist <= radii[b]  # a inside b's neighborhood
    else:
        a = b = np.empty(0, dtype=int)
        in_a = in_b = np.empty(0, dtype=bool)

    counts = np.ones(n, dtype=int)  # each point neighbors itself
    np.add.at(counts, a[in_a], 1)
    np.add.at(counts, b[in_b], 1)
    core = counts >= params.min_pts

    # Connected components over mutually reachable core pairs.
    mutual = in_a & in_b & core[a] & core[b]
    ca, cb = a[mutual], b[mutual]
    graph = csr_matrix((np.ones(ca.size, dtype=np.int8), (ca, cb)), shape=(n, n))
    _, comp = connected_components(graph, directed=False)

    labels = np.full(n, -1, dtype=int)
    labels[core] = comp[core]

    # Border points: lowest-index core whose neighborhood contains them.
    src = np.concatenate((a[in_a], b[in_b]))  # neighborhood owner (the core side)
    dst = np.concatenate((b[in_a], a[in_b]))  # the point being absorbed
    eligible = core[src] & ~core[dst]
    src, dst = src[eligible], dst[eligible]
    if src.size:
        order = np.lexsort((src, dst))
        dst_sorted, src_sorted = dst[order], src[order]
        first = np.ones(dst_sorted.size, dtype=bool)
        first[1:] = dst_sorted[1:] != dst_sorted[:-1]
        labels[dst_sorted[first]] = comp[src_sorted[first]]

    # Demote undersized clusters, then emit clusters by smallest member index.
    clustered = labels >= 0
    if clustered.any():
        sizes = np.bincount(labels[clustered])
        small = sizes[labels[clustered]] < params.min_cluster_size
        idx = np.flatnonzero(clustered)
        labels[idx[small]] = -1

    clusters: list[PointCluster] = []
    seen: dict[int, int] = {}
    members: list[list[int]] = []
    for i in range(n):
        lab = labels[i]
        if lab < 0:
            continue
        slot = seen.setdefault(lab, len(members))
        if slot == len(members):
            members.append([])
        members[slot].append(i)
    for idx_list in members:
        idx_arr = np.asarray(idx_list, dtype=int)
        clusters.append(
            PointCluster(
                xy=xy[idx_arr],
                indices=tuple(int(i) for i in idx_arr),
                core_indices=tuple(int(i) for i in idx_arr[core[idx_arr]]),
            )
        )
    outliers = [int(i) for i in np.flatnonzero(labels < 0)]
    return clusters, outliers
