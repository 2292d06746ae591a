"""Deterministic 2D parking-lot stand-in: world geometry and sensor models.

The world is a set of rotated rectangular obstacles inside an axis-aligned
boundary. The scan plane sits above car height, so obstacles of kind
``vehicle`` exist in the world but are invisible to the LiDAR. Pillars,
charging piles and stairwells are landmark-eligible; walls and vehicles
are not.

World file format (UTF-8 text)::

    lotworld v1
    bounds,min_x,min_y,max_x,max_y
    obstacle,kind,center_x,center_y,width,height,rotation

Floats are written with ``repr`` so a save/load round trip is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from lotloc.geometry import LaserScan, OdometrySample, Point2, Pose

WORLD_HEADER = "lotworld v1"
DEG = math.pi / 180.0


class WorldFormatError(ValueError):
    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ObstacleKind(str, Enum):
    PILLAR = "pillar"
    CHARGING_PILE = "charging_pile"
    STAIRWELL = "stairwell"
    WALL = "wall"
    VEHICLE = "vehicle"


_LANDMARK_KINDS = {ObstacleKind.PILLAR, ObstacleKind.CHARGING_PILE, ObstacleKind.STAIRWELL}


@dataclass(frozen=True)
class Obstacle:
    center: Point2
    width: float
    height: float
    rotation: float
    kind: ObstacleKind

    @property
    def landmark_eligible(self) -> bool:
        return self.kind in _LANDMARK_KINDS

    @property
    def scan_visible(self) -> bool:
        return self.kind is not ObstacleKind.VEHICLE

    def corners(self) -> tuple[Point2, ...]:
        """The four true corner positions, counter-clockwise."""
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        hw, hh = 0.5 * self.width, 0.5 * self.height
        pts = []
        for ux, uy in ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)):
            pts.append(Point2(self.center.x + ux * c - uy * s, self.center.y + ux * s + uy * c))
        return tuple(pts)


@dataclass(frozen=True)
class Bounds:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def contains(self, p: Point2, slack: float = 0.0) -> bool:
        return (
            self.min_x - slack <= p.x <= self.max_x + slack
            and self.min_y - slack <= p.y <= self.max_y + slack
        )

    @property
    def diagonal(self) -> float:
        return math.hypot(self.max_x - self.min_x, self.max_y - self.min_y)


@dataclass(frozen=True)
class WorldModel:
    obstacles: tuple[Obstacle, ...]
    bounds: Bounds
    origin_note: str = ""
    _segments: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        for ob in self.obstacles:
            for corner in ob.corners():
                if not self.bounds.contains(corner, slack=1e-9):
                    raise ValueError(f"obstacle corner {corner} outside bounds {self.bounds}")
        object.__setattr__(self, "_segments", self._visible_segments())

    def _visible_segments(self) -> np.ndarray:
        """Edges of scan-visible obstacles as an (S, 4) array (x0 y0 x1 y1)."""
        segs = []
        for ob in self.obstacles:
            if not ob.scan_visible:
                continue
            corners = ob.corners()
            for i in range(4):
                a, b = corners[i], corners[(i + 1) % 4]
                segs.append((a.x, a.y, b.x, b.y))
        return np.asarray(segs, dtype=float).reshape(-1, 4)


@dataclass(frozen=True)
class LidarSpec:
    """Scanner model: 30 m / 270 degree detection range, 0.25 degree
    resolution, range accuracy +-50 mm read as a 2-sigma bound."""

    max_range: float = 30.0
    fov: float = 270.0 * DEG
    angular_resolution: float = 0.25 * DEG
    range_noise_sigma: float = 0.025
    rate: float = 5.0

    def __post_init__(self) -> None:
        if min(self.max_range, self.fov, self.angular_resolution, self.rate) <= 0.0:
            raise ValueError("all LidarSpec values must be positive")
        if self.range_noise_sigma < 0.0:
            raise ValueError("range_noise_sigma must be >= 0")
        if self.fov > 2.0 * math.pi + 1e-12:
            raise ValueError("fov cannot exceed a full revolution")

    @property
    def n_rays(self) -> int:
        return int(round(self.fov / self.angular_resolution)) + 1

    @property
    def start_bearing(self) -> float:
        return -0.5 * self.fov


def raycast_scan(
    world: WorldModel,
    true_pose: Pose,
    spec: LidarSpec,
    rng: np.random.Generator,
    timestamp: float = 0.0,
) -> LaserScan:
    """One simulated LiDAR revolution from the true pose.

    One ray per angular step across the field of view centered on the
    heading; each valid range is the nearest intersection with a
    scan-visible obstacle edge, perturbed by additive Gaussian noise and
    clamped to (0, max_range]. Rays with no hit carry +inf. A full noise
    vector is drawn per scan regardless of hit count, so the generator
    stream is independent of the geometry.
    """
    if not world.bounds.contains(true_pose.position):
        raise ValueError(f"pose {true_pose} outside world bounds")
    bearings = true_pose.psi + spec.start_bearing + spec.angular_resolution * np.arange(spec.n_rays)
    dir_x, dir_y = np.cos(bearings), np.sin(bearings)

    segs = world._segments
    ranges = np.full(spec.n_rays, np.inf)
    if segs.shape[0]:
        ex = segs[:, 2] - segs[:, 0]
        ey = segs[:, 3] - segs[:, 1]
        fx = segs[:, 0] - true_pose.e
        fy = segs[:, 1] - true_pose.n
        # Solve p + t d = a + s e for every ray/segment combination.
        denom = dir_x[:, None] * ey[None, :] - dir_y[:, None] * ex[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (fx[None, :] * ey[None, :] - fy[None, :] * ex[None, :]) / denom
            s = (fx[None, :] * dir_y[:, None] - fy[None, :] * dir_x[:, None]) / denom
        hit = (np.abs(denom) > 1e-12) & (t > 1e-9) & (s >= 0.0) & (s <= 1.0) & (t <= spec.max_range)
        t = np.where(hit, t, np.inf)
        ranges = t.min(axis=1)

    noise = rng.normal(0.0, spec.range_noise_sigma, spec.n_rays)
    valid = np.isfinite(ranges)
    ranges[valid] = np.clip(ranges[valid] + noise[valid], 1e-6, spec.max_range)
    return LaserScan(
        timestamp=float(timestamp),
        start_bearing=spec.start_bearing,
        angular_step=spec.angular_resolution,
        ranges=ranges,
    )


def sample_odometry(
    true_twist: tuple[float, float],
    noise: tuple[float, float],
    rng: np.random.Generator,
    timestamp: float,
) -> OdometrySample:
    """Measured (speed, yaw rate): truth plus independent Gaussian noise."""
    v, yaw_rate = true_twist
    sigma_v, sigma_yaw = noise
    return OdometrySample(
        v=float(v + rng.normal(0.0, sigma_v)),
        yaw_rate=float(yaw_rate + rng.normal(0.0, sigma_yaw)),
        timestamp=float(timestamp),
    )


# 95% of radial position offsets within 5 m (Rayleigh), 95% of heading
# offsets within 2 degrees (two-sided normal).
INIT_SIGMA_POS = 5.0 / math.sqrt(2.0 * math.log(20.0))
INIT_SIGMA_HEADING = 2.0 * DEG / 1.96


def noisy_initial_fix(
    true_pose: Pose,
    rng: np.random.Generator,
    sigma_pos: float = INIT_SIGMA_POS,
    sigma_heading: float = INIT_SIGMA_HEADING,
) -> Pose:
    """Initial pose fix with per-axis Gaussian position noise."""
    return Pose(
        true_pose.e + rng.normal(0.0, sigma_pos),
        true_pose.n + rng.normal(0.0, sigma_pos),
        true_pose.psi + rng.normal(0.0, sigma_heading),
    )


def default_lot(seed: int = 20240711) -> WorldModel:
    """The built-in evaluation lot: 90 m x 60 m with 23 pillars on a
    jittered grid, 18 non-equidistant charging piles along the side walls,
    one stairwell, boundary walls and scan-invisible parked vehicles.

    Procedurally generated from a fixed seed; the layout keeps every pair
    of landmark corners farther apart than the default association gate.
    """
    rng = np.random.default_rng(seed)
    obstacles: list[Obstacle] = []

    # Boundary walls, 0.3 m thick, hugging the [0, 90] x [0, 60] perimeter.
    obstacles.append(Obstacle(Point2(45.0, 0.15), 90.0, 0.3, 0.0, ObstacleKind.WALL))
    obstacles.append(Obstacle(Point2(45.0, 59.85), 90.0, 0.3, 0.0, ObstacleKind.WALL))
    obstacles.append(Obstacle(Point2(0.15, 30.0), 0.3, 59.4, 0.0, ObstacleKind.WALL))
    obstacles.append(Obstacle(Point2(89.85, 30.0), 0.3, 59.4, 0.0, ObstacleKind.WALL))

    # 23 square pillars on a 4 x 6 grid with jitter; one grid slot is left
    # empty. Sizes and orientations vary per pillar: identical axis-aligned
    # squares would make the corner pattern invariant under a one-side-length
    # shift and localization could lock onto that alias.
    cols = [12.0, 25.0, 38.0, 52.0, 65.0, 78.0]
    rows = [12.0, 24.0, 36.0, 48.0]
    skip = (2, 3)  # row 2, col 3 stays open
    for ri, gy in enumerate(rows):
        for ci, gx in enumerate(cols):
            if (ri, ci) == skip:
                continue
            cx = gx + rng.uniform(-1.5, 1.5)
            cy = gy + rng.uniform(-1.5, 1.5)
            side = rng.uniform(0.55, 0.95)
            rot = rng.uniform(0.0, 90.0 * DEG)
            obstacles.append(Obstacle(Point2(cx, cy), side, side, rot, ObstacleKind.PILLAR))

    # 18 charging piles in two columns near the side walls; the spacing
    # along each column is drawn non-equidistant by design so corner
    # patterns stay distinguishable, and sizes vary for the same reason.
    for x in (3.0, 87.0):
        y = 8.0
        for _ in range(9):
            cy = y + rng.uniform(-0.4, 0.4)
            side = rng.uniform(0.55, 0.85)
            rot = rng.uniform(0.0, 90.0 * DEG)
            obstacles.append(Obstacle(Point2(x, cy), side, side, rot, ObstacleKind.CHARGING_PILE))
            y += rng.uniform(3.4, 6.2)

    # One stairwell block near the top wall.
    obstacles.append(Obstacle(Point2(70.0, 57.2), 6.0, 3.0, 0.0, ObstacleKind.STAIRWELL))

    # Parked vehicles between the pillar rows; above the scan plane's
    # obstacles in reality, so invisible to the LiDAR.
    for gy in (15.0, 21.0, 27.0, 33.0, 39.0, 45.0):
        for gx in (16.0, 30.0, 44.0, 58.0, 72.0):
            if rng.random() < 0.35:
                continue
            cx = gx + rng.uniform(-0.5, 0.5)
            cy = gy + rng.uniform(-0.3, 0.3)
            rot = rng.uniform(-3.0 * DEG, 3.0 * DEG)
            obstacles.append(Obstacle(Point2(cx, cy), 4.6, 1.9, rot, ObstacleKind.VEHICLE))

    return WorldModel(
        obstacles=tuple(obstacles),
        bounds=Bounds(-1.0, -1.0, 91.0, 61.0),
        origin_note=f"procedural default lot, seed {seed}",
    )


def save_world(world: WorldModel, path: str | Path) -> None:
    lines = [WORLD_HEADER]
    if world.origin_note:
        lines.append(f"# origin_note: {world.origin_note}")
    b = world.bounds
    lines.append(f"bounds,{float(b.min_x)!r},{float(b.min_y)!r},{float(b.max_x)!r},{float(b.max_y)!r}")
    for ob in world.obstacles:
        lines.append(
            f"obstacle,{ob.kind.value},{float(ob.center.x)!r},{float(ob.center.y)!r},"
            f"{float(ob.width)!r},{float(ob.height)!r},{float(ob.rotation)!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_world(path: str | Path) -> WorldModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != WORLD_HEADER:
        raise WorldFormatError(1, f"expected header {WORLD_HEADER!r}")
    bounds: Bounds | None = None
    origin_note = ""
    obstacles: list[Obstacle] = []
    for line_no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("origin_note:"):
                origin_note = body[len("origin_note:"):].strip()
            continue
        parts = line.split(",")
        try:
            if parts[0] == "bounds" and len(parts) == 5:
                bounds = Bounds(*(float(p) for p in parts[1:]))
            elif parts[0] == "obstacle" and len(parts) == 7:
                kind = ObstacleKind(parts[1])
                cx, cy, w, h, rot = (float(p) for p in parts[2:])
                obstacles.append(Obstacle(Point2(cx, cy), w, h, rot, kind))
            else:
                raise WorldFormatError(line_no, f"unrecognized record {raw!r}")
        except (ValueError, TypeError) as exc:
            if isinstance(exc, WorldFormatError):
                raise
            raise WorldFormatError(line_no, str(exc)) from None
    if bounds is None:
        raise WorldFormatError(len(lines), "missing bounds record")
    return WorldModel(tuple(obstacles), bounds, origin_note=origin_note)
