"""Planar geometry shared by the whole pipeline.

Coordinates live in a local east/north map frame (UTM axis convention,
arbitrary local origin) or in the sensor frame of a single scan. All
angles are radians; headings are measured against the east axis and kept
in (-pi, pi].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


class Point2(NamedTuple):
    """A 2D point in meters. Producers must only store finite values."""

    x: float
    y: float


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi], congruent mod 2*pi. Idempotent."""
    # remainder() returns [0, 2*pi), so the result lands exactly in (-pi, pi].
    return float(math.pi - np.remainder(math.pi - a, TWO_PI))


def normalize_angles(a: np.ndarray) -> np.ndarray:
    """Vectorized :func:`normalize_angle`; same formula, same rounding."""
    return math.pi - np.remainder(math.pi - np.asarray(a, dtype=float), TWO_PI)


@dataclass(frozen=True)
class Pose:
    """Robot or particle state: easting, northing and heading vs. east axis.

    The heading is normalized to (-pi, pi] on construction; all fields are
    validated finite.
    """

    e: float
    n: float
    psi: float

    def __post_init__(self) -> None:
        e, n, psi = float(self.e), float(self.n), float(self.psi)
        if not (math.isfinite(e) and math.isfinite(n) and math.isfinite(psi)):
            raise ValueError(f"non-finite pose ({e}, {n}, {psi})")
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "psi", normalize_angle(psi))

    @property
    def position(self) -> Point2:
        return Point2(self.e, self.n)


@dataclass(frozen=True)
class OdometrySample:
    """One odometry/IMU reading: measured speed and yaw rate at a timestamp.

    Timestamps must be monotone non-decreasing within a stream.
    """

    v: float
    yaw_rate: float
    timestamp: float


@dataclass(frozen=True)
class LaserScan:
    """One LiDAR revolution: equally spaced bearings with one range each.

    Bearings are in the sensor frame (0 = robot heading). Invalid returns
    are encoded as +inf so angular indexing stays dense.
    """

    timestamp: float
    start_bearing: float
    angular_step: float
    ranges: np.ndarray

    def __post_init__(self) -> None:
        ranges = np.asarray(self.ranges, dtype=float)
        object.__setattr__(self, "ranges", ranges)
        if not self.angular_step > 0.0:
            raise ValueError(f"angular_step must be > 0, got {self.angular_step}")
        if ranges.size * self.angular_step > TWO_PI + 1e-12:
            raise ValueError("scan spans more than a full revolution")

    @property
    def bearings(self) -> np.ndarray:
        return self.start_bearing + self.angular_step * np.arange(self.ranges.size)


def scan_to_xy(scan: LaserScan) -> np.ndarray:
    """Valid returns of a scan as an (n, 2) sensor-frame array, scan order."""
    valid = np.isfinite(scan.ranges)
    r = scan.ranges[valid]
    b = scan.bearings[valid]
    return np.column_stack((r * np.cos(b), r * np.sin(b)))


def scan_to_points(scan: LaserScan) -> list[Point2]:
    """Polar-to-Cartesian conversion of the valid returns, in scan order."""
    return [Point2(float(x), float(y)) for x, y in scan_to_xy(scan)]


def transform_to_map(pose: Pose, p: Point2) -> Point2:
    """Rotate a sensor-frame point by the pose heading and translate.

    x' = x cos(psi) - y sin(psi) + E
    y' = x sin(psi) + y cos(psi) + N
    """
    c = float(np.cos(np.float64(pose.psi)))
    s = float(np.sin(np.float64(pose.psi)))
    return Point2(p[0] * c - p[1] * s + pose.e, p[0] * s + p[1] * c + pose.n)


def transform_xy(pose: Pose, xy: np.ndarray) -> np.ndarray:
    """Vectorized :func:`transform_to_map` for an (n, 2) array.

    Uses the exact same operation order as the scalar version so results
    agree bit-for-bit.
    """
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    c = np.cos(np.float64(pose.psi))
    s = np.sin(np.float64(pose.psi))
    out = np.empty_like(xy)
    out[:, 0] = xy[:, 0] * c - xy[:, 1] * s + pose.e
    out[:, 1] = xy[:, 0] * s + xy[:, 1] * c + pose.n
    return out


def compose(a: Pose, b: Pose) -> Pose:
    """Pose of frame C in frame A, given B-in-A (``a``) and C-in-B (``b``)."""
    c = float(np.cos(np.float64(a.psi)))
    s = float(np.sin(np.float64(a.psi)))
    return Pose(
        b.e * c - b.n * s + a.e,
        b.e * s + b.n * c + a.n,
        a.psi + b.psi,
    )


def invert(a: Pose) -> Pose:
    """Inverse transform: ``compose(a, invert(a))`` is the identity pose."""
    c = float(np.cos(np.float64(a.psi)))
    s = float(np.sin(np.float64(a.psi)))
    return Pose(-(a.e * c + a.n * s), a.e * s - a.n * c, -a.psi)


def points_to_xy(points: Sequence[Point2] | np.ndarray) -> np.ndarray:
    """Normalize a point list or array to an (n, 2) float array."""
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, 2)
    return arr.reshape(-1, 2)
