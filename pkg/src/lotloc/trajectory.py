"""Scripted ground-truth trajectories: filleted polylines, trapezoid speed.

A waypoint polyline is compiled into straight segments joined by circular
fillet arcs at the interior vertices, giving a continuous pose path whose
twist (speed, yaw rate) is piecewise exact: yaw rate is zero on segments
and +-speed/radius on arcs. The speed profile is a trapezoid: constant
acceleration from rest, cruise, constant deceleration to rest at the end
(triangular when the route is too short to reach cruise speed).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from lotloc.geometry import Point2, Pose, normalize_angle


class OutOfRangeError(ValueError):
    """Requested time outside [0, duration]."""


@dataclass(frozen=True)
class TrajectorySpec:
    """Route description plus odometry sampling parameters."""

    waypoints: tuple[Point2, ...]
    speed: float = 2.0
    turn_radius: float = 2.0
    accel: float = 0.5
    odom_rate: float = 100.0
    odom_sigma_v: float = 0.01
    odom_sigma_yaw_rate: float = 0.002

    def __post_init__(self) -> None:
        object.__setattr__(self, "waypoints", tuple(Point2(float(p[0]), float(p[1])) for p in self.waypoints))
        if len(self.waypoints) < 2:
            raise ValueError("need at least two waypoints")
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            if math.hypot(b.x - a.x, b.y - a.y) < 1e-9:
                raise ValueError("consecutive waypoints must be distinct")
        if min(self.speed, self.turn_radius, self.accel, self.odom_rate) <= 0.0:
            raise ValueError("speed, turn_radius, accel and odom_rate must be positive")
        if self.odom_sigma_v < 0.0 or self.odom_sigma_yaw_rate < 0.0:
            raise ValueError("odometry noise sigmas must be >= 0")


@dataclass(frozen=True)
class _Line:
    x0: float
    y0: float
    heading: float
    length: float

    @property
    def curvature(self) -> float:
        return 0.0

    def at(self, s: float) -> Pose:
        return Pose(
            self.x0 + s * math.cos(self.heading),
            self.y0 + s * math.sin(self.heading),
            self.heading,
        )


@dataclass(frozen=True)
class _Arc:
    cx: float
    cy: float
    radius: float
    start_angle: float  # angle of the entry point seen from the center
    turn: float  # signed total turn; positive = left
    length: float

    @property
    def curvature(self) -> float:
        return math.copysign(1.0 / self.radius, self.turn)

    def at(self, s: float) -> Pose:
        ang = self.start_angle + math.copysign(s / self.radius, self.turn)
        heading = ang + math.copysign(0.5 * math.pi, self.turn)
        return Pose(
            self.cx + self.radius * math.cos(ang),
            self.cy + self.radius * math.sin(ang),
            heading,
        )


class TrajectoryPlan:
    """Compiled route: primitives with cumulative arc length, plus the
    closed-form trapezoid timing."""

    def __init__(self, spec: TrajectorySpec) -> None:
        self.spec = spec
        self._primitives = _build_primitives(spec.waypoints, spec.turn_radius)
        self._cum = np.concatenate(([0.0], np.cumsum([p.length for p in self._primitives])))
        self.length = float(self._cum[-1])
        v, a = spec.speed, spec.accel
        ramp = v * v / a  # distance to accelerate plus decelerate
        if self.length >= ramp:
            self._v_peak = v
            self._t_ramp = v / a
            self._t_cruise = (self.length - ramp) / v
        else:
            self._v_peak = math.sqrt(a * self.length)
            self._t_ramp = self._v_peak / a
            self._t_cruise = 0.0
        self.duration = 2.0 * self._t_ramp + self._t_cruise

    def speed_at(self, t: float) -> float:
        a = self.spec.accel
        if t < self._t_ramp:
            return a * t
        if t < self._t_ramp + self._t_cruise:
            return self._v_peak
        return max(self._v_peak - a * (t - self._t_ramp - self._t_cruise), 0.0)

    def distance_at(self, t: float) -> float:
        a = self.spec.accel
        if t < self._t_ramp:
            return 0.5 * a * t * t
        s = 0.5 * a * self._t_ramp * self._t_ramp
        if t < self._t_ramp + self._t_cruise:
            return s + self._v_peak * (t - self._t_ramp)
        s += self._v_peak * self._t_cruise
        td = t - self._t_ramp - self._t_cruise
        return min(s + self._v_peak * td - 0.5 * a * td * td, self.length)

    def sample(self, t: float) -> tuple[Pose, tuple[float, float]]:
        """Pose and exact twist (speed, yaw rate) at time t."""
        if not 0.0 <= t <= self.duration + 1e-9:
            raise OutOfRangeError(f"t={t!r} outside [0, {self.duration!r}]")
        s = min(self.distance_at(t), self.length)
        i = int(np.searchsorted(self._cum, s, side="right") - 1)
        i = min(i, len(self._primitives) - 1)
        prim = self._primitives[i]
        pose = prim.at(s - self._cum[i])
        v = self.speed_at(min(t, self.duration))
        return pose, (v, v * prim.curvature)


def _build_primitives(waypoints: Sequence[Point2], radius: float):
    """Straight legs with tangent fillet arcs at every interior vertex."""
    headings = []
    lengths = []
    for a, b in zip(waypoints, waypoints[1:]):
        headings.append(math.atan2(b.y - a.y, b.x - a.x))
        lengths.append(math.hypot(b.x - a.x, b.y - a.y))

    # Tangent offset consumed at each interior vertex.
    offsets = [0.0]
    turns = []
    for h0, h1 in zip(headings, headings[1:]):
        turn = normalize_angle(h1 - h0)
        turns.append(turn)
        if abs(turn) < 1e-12:
            offsets.append(0.0)
        elif abs(abs(turn) - math.pi) < 1e-9:
            raise ValueError("u-turn between consecutive legs; add an intermediate waypoint")
        else:
            offsets.append(radius * math.tan(0.5 * abs(turn)))
    offsets.append(0.0)

    for i, length in enumerate(lengths):
        if offsets[i] + offsets[i + 1] > length + 1e-9:
            raise ValueError(
                f"turn radius {radius} too large for leg {i} of length {length:.3f}"
            )

    primitives: list[_Line | _Arc] = []
    for i, (h, length) in enumerate(zip(headings, lengths)):
        a = waypoints[i]
        start = (a.x + offsets[i] * math.cos(h), a.y + offsets[i] * math.sin(h))
        run = length - offsets[i] - offsets[i + 1]
        if run > 1e-12:
            primitives.append(_Line(start[0], start[1], h, run))
        if i < len(turns) and abs(turns[i]) >= 1e-12:
            turn = turns[i]
            vx = waypoints[i + 1].x
            vy = waypoints[i + 1].y
            entry_x = vx - offsets[i + 1] * math.cos(h)
            entry_y = vy - offsets[i + 1] * math.sin(h)
            side = math.copysign(1.0, turn)
            # Center sits one radius to the side of the entry tangent.
            cx = entry_x - side * radius * math.sin(h)
            cy = entry_y + side * radius * math.cos(h)
            start_angle = math.atan2(entry_y - cy, entry_x - cx)
            primitives.append(
                _Arc(cx, cy, radius, start_angle, turn, radius * abs(turn))
            )
    if not primitives:
        raise ValueError("degenerate route")
    return tuple(primitives)


@lru_cache(maxsize=8)
def _plan_cache(spec: TrajectorySpec) -> TrajectoryPlan:
    return TrajectoryPlan(spec)


def step_trajectory(spec: TrajectorySpec, t: float) -> tuple[Pose, tuple[float, float]]:
    """Ground-truth pose and twist at time t along the compiled route."""
    return _plan_cache(spec).sample(t)


ROUTE_HEADER = "lotroute v1"


def load_waypoints(path) -> tuple[Point2, ...]:
    """Waypoints from a route file: header ``lotroute v1``, then one
    ``waypoint,x,y`` record per line; ``#`` starts a comment."""
    from pathlib import Path

    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != ROUTE_HEADER:
        raise ValueError(f"{path}: expected header {ROUTE_HEADER!r}")
    waypoints: list[Point2] = []
    for line_no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 3 or parts[0] != "waypoint":
            raise ValueError(f"{path}:{line_no}: expected 'waypoint,x,y', got {raw!r}")
        waypoints.append(Point2(float(parts[1]), float(parts[2])))
    return tuple(waypoints)


def default_route(loops: int = 3, **overrides) -> TrajectorySpec:
    """Serpentine circuit through the default lot's aisles, repeated
    ``loops`` times (~368 m per loop)."""
    if loops < 1:
        raise ValueError("loops must be >= 1")
    circuit = [
        (8.0, 18.0),
        (82.0, 18.0),
        (82.0, 30.0),
        (8.0, 30.0),
        (8.0, 42.0),
        (82.0, 42.0),
        (82.0, 54.0),
        (8.0, 54.0),
    ]
    waypoints: list[tuple[float, float]] = []
    for _ in range(loops):
        waypoints.extend(circuit)
    waypoints.append(circuit[0])
    return TrajectorySpec(waypoints=tuple(Point2(*w) for w in waypoints), **overrides)
