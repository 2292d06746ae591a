"""Corner landmark map: storage, persistence, candidate selection, NN index.

Every corner of a landmark-eligible structure is stored as an independent
ID'd map point. The map file format is line-oriented UTF-8 text:

    lotmap v1
    # optional comments; "# origin_note: ..." round-trips the note field
    id,easting,northing

Coordinates are written with ``repr`` so a save/load round trip is exact.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TYPE_CHECKING

import numpy as np

from lotloc.geometry import Point2, Pose, points_to_xy

if TYPE_CHECKING:  # pragma: no cover
    from lotloc.worldsim import WorldModel

MAP_HEADER = "lotmap v1"


class MapFormatError(ValueError):
    """Map file violates the expected format; carries the 1-based line."""

    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DuplicateIdError(ValueError):
    """Two landmarks share one id."""


class EmptyIndexError(ValueError):
    """Nearest-neighbor query against an index with no points."""


@dataclass(frozen=True)
class Landmark:
    id: int
    position: Point2


@dataclass(frozen=True)
class LandmarkMap:
    """Immutable set of corner landmarks in the local map frame.

    ``min_separation`` always equals the actual minimum pairwise distance
    (inf for fewer than two landmarks); it is recomputed on construction.
    """

    landmarks: tuple[Landmark, ...]
    origin_note: str = ""
    min_separation: float = field(init=False, default=math.inf)

    def __post_init__(self) -> None:
        object.__setattr__(self, "landmarks", tuple(self.landmarks))
        ids = [lm.id for lm in self.landmarks]
        if len(set(ids)) != len(ids):
            raise DuplicateIdError("landmark ids must be unique")
        object.__setattr__(self, "min_separation", _min_pairwise_distance(self.positions()))

    def __len__(self) -> int:
        return len(self.landmarks)

    def positions(self) -> np.ndarray:
        return points_to_xy([lm.position for lm in self.landmarks])

    def ids(self) -> np.ndarray:
        return np.asarray([lm.id for lm in self.landmarks], dtype=int)


def _min_pairwise_distance(xy: np.ndarray) -> float:
    if xy.shape[0] < 2:
        return math.inf
    diff = xy[:, None, :] - xy[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    np.fill_diagonal(d2, np.inf)
    return float(np.sqrt(d2.min()))


def build_map_from_world(world: "WorldModel", distinctness_gate: float = 0.5) -> LandmarkMap:
    """Emit the four true corners of every landmark-eligible obstacle.

    Pillars, charging piles and stairwells are eligible; walls and vehicles
    are not. Ids are assigned in obstacle order, four corners apiece. Warns
    when the resulting minimum corner separation does not exceed
    ``distinctness_gate`` (landmarks too alike to distinguish in
    association).
    """
    landmarks: list[Landmark] = []
    next_id = 0
    for obstacle in world.obstacles:
        if not obstacle.landmark_eligible:
            continue
        for corner in obstacle.corners():
            landmarks.append(Landmark(next_id, corner))
            next_id += 1
    lot_map = LandmarkMap(tuple(landmarks), origin_note=world.origin_note)
    if len(lot_map) >= 2 and lot_map.min_separation <= distinctness_gate:
        warnings.warn(
            f"minimum landmark separation {lot_map.min_separation:.3f} m does not "
            f"exceed the association gate {distinctness_gate:.3f} m",
            stacklevel=2,
        )
    return lot_map


def save_map(lot_map: LandmarkMap, path: str | Path) -> None:
    lines = [MAP_HEADER]
    if lot_map.origin_note:
        lines.append(f"# origin_note: {lot_map.origin_note}")
    for lm in lot_map.landmarks:
        lines.append(f"{lm.id},{float(lm.position.x)!r},{float(lm.position.y)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_map(path: str | Path) -> LandmarkMap:
    landmarks: list[Landmark] = []
    seen: set[int] = set()
    origin_note = ""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != MAP_HEADER:
        raise MapFormatError(1, f"expected header {MAP_HEADER!r}")
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
        if len(parts) != 3:
            raise MapFormatError(line_no, f"expected 'id,easting,northing', got {raw!r}")
        try:
            lm_id = int(parts[0])
            x, y = float(parts[1]), float(parts[2])
        except ValueError as exc:
            raise MapFormatError(line_no, str(exc)) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise MapFormatError(line_no, "non-finite coordinate")
        if lm_id in seen:
            raise DuplicateIdError(f"line {line_no}: duplicate landmark id {lm_id}")
        seen.add(lm_id)
        landmarks.append(Landmark(lm_id, Point2(x, y)))
    return LandmarkMap(tuple(landmarks), origin_note=origin_note)


def select_visible(
    lot_map: LandmarkMap,
    estimate: Pose,
    sensor_range: float,
    margin: float = 6.0,
) -> list[Landmark]:
    """Landmarks within ``sensor_range + margin`` of the estimate (closed ball).

    The margin absorbs pose-estimate uncertainty; the 6 m default covers the
    three-sigma envelope of the default initialization noise. Monotone in
    range: a larger range yields a superset.
    """
    if not sensor_range > 0.0:
        raise ValueError("sensor_range must be > 0")
    if not lot_map.landmarks:
        return []
    xy = lot_map.positions()
    dx = xy[:, 0] - estimate.e
    dy = xy[:, 1] - estimate.n
    dist = np.sqrt(dx * dx + dy * dy)
    keep = dist <= sensor_range + margin
    return [lm for lm, k in zip(lot_map.landmarks, keep) if k]


class NNIndex:
    """Balanced 2-D kd-tree answering exact nearest-neighbor queries.

    Results are identical to a brute-force scan, including the tie rule:
    among equidistant points the smallest insertion index wins. Built once,
    immutable afterwards; concurrent queries are safe.
    """

    __slots__ = ("xy", "_left", "_right", "_axis", "_root")

    def __init__(self, points: Sequence[Point2] | np.ndarray) -> None:
        self.xy = points_to_xy(points)
        n = self.xy.shape[0]
        self._left = np.full(n, -1, dtype=np.int64)
        self._right = np.full(n, -1, dtype=np.int64)
        self._axis = np.zeros(n, dtype=np.int8)
        self._root = self._build(np.arange(n, dtype=np.int64), 0)

    def __len__(self) -> int:
        return self.xy.shape[0]

    def _build(self, indices: np.ndarray, depth: int) -> int:
        n = indices.size
        if n == 0:
            return -1
        axis = depth % 2
        mid = n // 2
        order = np.argsort(self.xy[indices, axis], kind="stable")
        indices = indices[order]
        node = int(indices[mid])
        self._axis[node] = axis
        self._left[node] = self._build(indices[:mid], depth + 1)
        self._right[node] = self._build(indices[mid + 1:], depth + 1)
        return node

    def nearest_index(self, q: Point2 | Sequence[float]) -> tuple[int, float]:
        """Index of the true nearest stored point and its distance."""
        if self.xy.shape[0] == 0:
            raise EmptyIndexError("nearest query on an empty index")
        qx, qy = float(q[0]), float(q[1])
        best_idx = -1
        best_d2 = math.inf
        # Explicit stack; the far side is visited whenever the splitting
        # plane is not strictly farther than the best distance, so exact
        # ties are never pruned away.
        stack = [self._root]
        xs, ys = self.xy[:, 0], self.xy[:, 1]
        while stack:
            node = stack.pop()
            if node < 0:
                continue
            dx = qx - xs[node]
            dy = qy - ys[node]
            d2 = dx * dx + dy * dy
            if d2 < best_d2 or (d2 == best_d2 and node < best_idx):
                best_idx, best_d2 = node, d2
            plane = dx if self._axis[node] == 0 else dy
            near, far = (self._left[node], self._right[node]) if plane < 0 else (self._right[node], self._left[node])
            if plane * plane <= best_d2:
                stack.append(far)
            stack.append(near)
        return best_idx, math.sqrt(best_d2)

    def nearest(self, q: Point2 | Sequence[float]) -> tuple[Point2, float]:
        """The nearest stored point and its Euclidean distance."""
        idx, dist = self.nearest_index(q)
        return Point2(float(self.xy[idx, 0]), float(self.xy[idx, 1])), dist


def build_index(points: Sequence[Point2] | np.ndarray) -> NNIndex:
    return NNIndex(points)


def nearest(index: NNIndex, q: Point2) -> tuple[Point2, float]:
    return index.nearest(q)
