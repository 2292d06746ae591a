"""Brute-force reference implementations used as independent oracles.

These deliberately share no code with the package: quadratic scans,
explicit loops and plain python data structures only.
"""
from __future__ import annotations

import math

import numpy as np


def brute_force_nearest(points: np.ndarray, q) -> tuple[int, float]:
    """Ascending-index scan with strict improvement: smallest index wins ties."""
    best_i, best_d = -1, math.inf
    for i, (x, y) in enumerate(points):
        d = math.sqrt((x - q[0]) ** 2 + (y - q[1]) ** 2)
        if d < best_d:
            best_i, best_d = i, d
    return best_i, best_d


def brute_force_dbscan(xy: np.ndarray, radii: np.ndarray, min_pts: int, min_cluster_size: int):
    """Order-fixed DBSCAN oracle; semantics per the segmentation module doc.

    Returns (labels, core_flags); label -1 means outlier. Cluster labels are
    renumbered 0.. in order of each cluster's smallest member index.
    """
    n = xy.shape[0]
    dist = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            dist[i, j] = math.sqrt((xy[i, 0] - xy[j, 0]) ** 2 + (xy[i, 1] - xy[j, 1]) ** 2)

    core = []
    for i in range(n):
        neighbors = sum(1 for j in range(n) if dist[i, j] <= radii[i])  # self included
        core.append(neighbors >= min_pts)

    # Components над mutually-reachable core pairs, via DFS.
    comp = [-1] * n
    n_comp = 0
    for i in range(n):
        if not core[i] or comp[i] != -1:
            continue
        stack = [i]
        comp[i] = n_comp
        while stack:
            u = stack.pop()
            for v in range(n):
                if core[v] and comp[v] == -1 and dist[u, v] <= min(radii[u], radii[v]):
                    comp[v] = n_comp
                    stack.append(v)
        n_comp += 1

    labels = [-1] * n
    for i in range(n):
        if core[i]:
            labels[i] = comp[i]
            continue
        for c in range(n):  # ascending index: first core that reaches i wins
            if core[c] and dist[i, c] <= radii[c]:
                labels[i] = comp[c]
                break

    # Demote undersized clusters.
    sizes: dict[int, int] = {}
    for lab in labels:
        if lab >= 0:
            sizes[lab] = sizes.get(lab, 0) + 1
    for i in range(n):
        if labels[i] >= 0 and sizes[labels[i]] < min_cluster_size:
            labels[i] = -1

    # Renumber by smallest member index.
    remap: dict[int, int] = {}
    for i in range(n):
        if labels[i] >= 0 and labels[i] not in remap:
            remap[labels[i]] = len(remap)
    labels = [remap[lab] if lab >= 0 else -1 for lab in labels]
    return labels, core


def closeness_score_oracle(xy: np.ndarray, theta: float, d_min: float) -> float:
    """Independent evaluation of the closeness criterion at one heading."""
    e1 = (math.cos(theta), math.sin(theta))
    e2 = (-math.sin(theta), math.cos(theta))
    c1 = [p[0] * e1[0] + p[1] * e1[1] for p in xy]
    c2 = [p[0] * e2[0] + p[1] * e2[1] for p in xy]

    def boundary_distances(c):
        hi, lo = max(c), min(c)
        to_hi = [hi - v for v in c]
        to_lo = [v - lo for v in c]
        return to_hi if sum(to_hi) <= sum(to_lo) else to_lo

    d1 = boundary_distances(c1)
    d2 = boundary_distances(c2)
    return sum(1.0 / max(min(a, b), d_min) for a, b in zip(d1, d2))


def best_theta_oracle(xy: np.ndarray, angle_step: float, d_min: float) -> float:
    """Grid argmax of the oracle score over [0, pi/2)."""
    best_t, best_s = 0.0, -math.inf
    theta = 0.0
    while theta < math.pi / 2.0:
        s = closeness_score_oracle(xy, theta, d_min)
        if s > best_s:
            best_t, best_s = theta, s
        theta += angle_step
    return best_t
