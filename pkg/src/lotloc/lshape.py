"""Search-based rectangle fitting over cluster points (closeness criterion).

For every candidate heading theta in a [0, pi/2) grid the points are
projected onto the rotated axes e1 = (cos t, sin t), e2 = (-sin t, cos t).
Per axis, the boundary (projection max or min) with the smaller total
distance is chosen; each point scores the inverse of its distance to the
nearer chosen boundary, clamped below at ``d_min``. The heading with the
maximal score wins and the rectangle is closed from the min/max
projections, so all cluster points lie inside it by construction. The four
edges come out as a_i x + b_i y = c_i with unit (a_i, b_i), ordered
(min axis-1, min axis-2, max axis-1, max axis-2); corners are the
intersections of cyclically adjacent edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from lotloc.geometry import Point2, points_to_xy
from lotloc.segmentation import PointCluster


class DegenerateCluster(ValueError):
    """Cluster is (near) collinear: no meaningful rectangle exists."""


class ParallelEdges(ValueError):
    """Adjacent edge normals are parallel; no corner intersection."""


@dataclass(frozen=True)
class LShapeParams:
    """Search resolution and fit gating."""

    angle_step: float = math.pi / 360.0  # 0.5 degrees
    d_min: float = 0.01
    min_edge: float = 0.2
    max_edge: float = 8.0

    def __post_init__(self) -> None:
        if not 0.0 < self.angle_step <= math.pi / 8.0:
            raise ValueError("angle_step must be in (0, pi/8]")
        if not self.d_min > 0.0:
            raise ValueError("d_min must be > 0")
        if not 0.0 < self.min_edge < self.max_edge:
            raise ValueError("need 0 < min_edge < max_edge")


@dataclass(frozen=True)
class FittedRectangle:
    """Best-heading bounding rectangle of a cluster.

    ``edges`` are (a, b, c) line triples with unit (a, b); ``corners`` are
    counter-clockwise, starting at the lexicographically smallest one.
    """

    theta_star: float
    edges: tuple[tuple[float, float, float], ...]
    corners: tuple[Point2, ...]
    score: float

    def edge_lengths(self) -> tuple[float, float]:
        """Extents along the fitted axes (axis-1 length, axis-2 length)."""
        _, _, c1 = self.edges[0]
        _, _, c2 = self.edges[1]
        _, _, c3 = self.edges[2]
        _, _, c4 = self.edges[3]
        return (c3 - c1, c4 - c2)


def inverse_distance_sum(distances: Sequence[float] | np.ndarray, d_min: float) -> float:
    """Closeness accumulator: sum of 1 / max(d_i, d_min)."""
    d = np.maximum(np.asarray(distances, dtype=float), d_min)
    return float(np.sum(1.0 / d))


def closeness_score(
    c1: Sequence[float] | np.ndarray,
    c2: Sequence[float] | np.ndarray,
    d_min: float,
) -> float:
    """Closeness of projected points to the nearer chosen boundary pair.

    Per axis the candidate boundaries are the projection max and min; the
    one whose distance vector has the smaller 1-norm is kept (ties toward
    the max side). Each point contributes 1 / max(d_i, d_min) with d_i its
    distance to the nearer of the two chosen boundaries.
    """
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    if c1.shape != c2.shape or c1.size < 2:
        raise ValueError("c1 and c2 must have the same length >= 2")
    d1 = _chosen_boundary_distances(c1)
    d2 = _chosen_boundary_distances(c2)
    return inverse_distance_sum(np.minimum(d1, d2), d_min)


def _chosen_boundary_distances(c: np.ndarray) -> np.ndarray:
    to_max = c.max() - c
    to_min = c - c.min()
    return to_max if to_max.sum() <= to_min.sum() else to_min


def fit_rectangle(cluster: PointCluster | np.ndarray, params: LShapeParams) -> FittedRectangle:
    """Grid-search the heading maximizing the closeness score, close the box.

    Raises :class:`DegenerateCluster` when the winning rectangle has (near)
    zero extent along either axis, which happens for collinear points.
    """
    xy = cluster.xy if isinstance(cluster, PointCluster) else points_to_xy(cluster)
    m = xy.shape[0]
    if m < 2:
        raise ValueError("need at least 2 points to fit a rectangle")

    thetas = np.arange(0.0, math.pi / 2.0, params.angle_step)
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    c1 = xy[:, 0, None] * cos_t + xy[:, 1, None] * sin_t  # (m, T) axis-1 projections
    c2 = xy[:, 1, None] * cos_t - xy[:, 0, None] * sin_t  # (m, T) axis-2 projections

    c1_max, c1_min = c1.max(axis=0), c1.min(axis=0)
    c2_max, c2_min = c2.max(axis=0), c2.min(axis=0)
    # Boundary choice by 1-norm of the distance vectors, ties toward max.
    up1 = (m * c1_max - c1.sum(axis=0)) <= (c1.sum(axis=0) - m * c1_min)
    up2 = (m * c2_max - c2.sum(axis=0)) <= (c2.sum(axis=0) - m * c2_min)
    d1 = np.where(up1, c1_max - c1, c1 - c1_min)
    d2 = np.where(up2, c2_max - c2, c2 - c2_min)
    d = np.maximum(np.minimum(d1, d2), params.d_min)
    scores = np.sum(1.0 / d, axis=0)

    best = int(np.argmax(scores))  # first maximum: deterministic
    theta = float(thetas[best])
    if min(c1_max[best] - c1_min[best], c2_max[best] - c2_min[best]) < 1e-6:
        raise DegenerateCluster(f"projected extent below 1e-6 m at theta={theta!r}")

    ct, st = float(cos_t[best]), float(sin_t[best])
    edges = (
        (ct, st, float(c1_min[best])),
        (-st, ct, float(c2_min[best])),
        (ct, st, float(c1_max[best])),
        (-st, ct, float(c2_max[best])),
    )
    return FittedRectangle(
        theta_star=theta,
        edges=edges,
        corners=rectangle_corners(edges),
        score=float(scores[best]),
    )


def rectangle_corners(edges: Sequence[tuple[float, float, float]]) -> tuple[Point2, ...]:
    """Intersect cyclically adjacent edge lines into four CCW corners.

    The first corner is the one with the smallest (x, y) lexicographically.
    Raises :class:`ParallelEdges` when an adjacent pair has parallel normals.
    """
    if len(edges) != 4:
        raise ValueError("expected exactly 4 edges")
    pts = []
    for i in range(4):
        a1, b1, c1 = edges[i]
        a2, b2, c2 = edges[(i + 1) % 4]
        det = a1 * b2 - a2 * b1
        if abs(det) < 1e-12:
            raise ParallelEdges(f"edges {i} and {(i + 1) % 4} are parallel")
        pts.append(Point2((c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det))
    # Enforce CCW order (positive shoelace area), then rotate to the
    # lexicographic minimum.
    area = sum(pts[i].x * pts[(i + 1) % 4].y - pts[(i + 1) % 4].x * pts[i].y for i in range(4))
    if area < 0.0:
        pts.reverse()
    start = min(range(4), key=lambda i: (pts[i].x, pts[i].y))
    return tuple(pts[start:] + pts[:start])


def extract_corner_observations(
    clusters: Sequence[PointCluster],
    params: LShapeParams,
    diagnostics: dict | None = None,
) -> list[Point2]:
    """Fit every cluster and concatenate the corners of the surviving fits.

    A fit survives when its dominant edge length lies inside
    [min_edge, max_edge]: slivers far below ``min_edge`` are sensor noise,
    anything beyond ``max_edge`` is a wall run, while thin partial views of
    large structures (one long edge, one tiny) are legitimate observations.
    Degenerate clusters are dropped silently and counted in ``diagnostics``.
    """
    corners: list[Point2] = []
    dropped_degenerate = 0
    dropped_gate = 0
    for cluster in clusters:
        try:
            rect = fit_rectangle(cluster, params)
        except DegenerateCluster:
            dropped_degenerate += 1
            continue
        longest = max(rect.edge_lengths())
        if not params.min_edge <= longest <= params.max_edge:
            dropped_gate += 1
            continue
        corners.extend(rect.corners)
    if diagnostics is not None:
        diagnostics["dropped_degenerate"] = dropped_degenerate
        diagnostics["dropped_gate"] = dropped_gate
    return corners
