"""Monte Carlo localization against a corner landmark map.

The belief over the robot pose is a set of weighted particles. Each cycle:

* motion update: dead-reckon every particle with the measured speed and
  yaw rate, perturbed per particle, using the constant-twist arc

      dpsi = yaw_rate * dt
      psi' = psi + dpsi
      E'   = E + v / yaw_rate * (sin(psi + dpsi) - sin(psi))
      N'   = N + v / yaw_rate * (cos(psi) - cos(psi + dpsi))

  with the straight-line limit E += v dt cos(psi), N += v dt sin(psi) when
  |yaw_rate| falls below ``yaw_rate_epsilon``;

* measurement update: corner observations are transformed into the map
  frame per particle, associated one-to-one per landmark against the
  visible map subset, and the particle weight is the product over matched
  pairs of

      g = exp(-0.5 * ((d_lat/sigma_lat)^2 + (d_lon/sigma_lon)^2))
          / (2 pi sigma_lat sigma_lon)

  where d_lat/d_lon split the pairing error across/along the particle
  heading;

* resampling: N independent multinomial draws proportional to weight,
  weights reset to 1/N. The pose estimate is the highest-weight particle
  of the weighted set (taken before resampling resets the weights).

All randomness flows through an explicit numpy Generator; identical seeds
and inputs reproduce bit-identical filter trajectories.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from lotloc.geometry import (
    Point2,
    Pose,
    compose,
    invert,
    normalize_angles,
    points_to_xy,
    transform_xy,
)
from lotloc.landmarks import Landmark, LandmarkMap, NNIndex, select_visible


class NoLandmarksVisible(RuntimeError):
    """No map landmark near the current estimate: divergence or bad map."""


class AllZeroWeightsError(ValueError):
    """Resampling requested with no positive weight."""


@dataclass(frozen=True)
class FilterParams:
    """Particle filter configuration.

    Position/heading init sigmas default to the simulator's initial-fix
    quality (95% of fixes within 5 m and 2 degrees). ``ess_skip_ratio`` is
    an opt-in effective-sample-size gate: 0 resamples after every
    measurement update (the default behavior), a positive value skips
    resampling while ESS > ratio * N.

    ``convergence_boost`` widens the measurement sigmas and the gate in
    proportion to the particle cloud's positional spread. While the belief
    is still meters wide a single razor-sharp update would collapse all
    diversity onto whichever particle happens to score best, which in a
    semi-regular lot is frequently an aliased pose; the widened model keeps
    competing hypotheses alive until accumulated evidence from new
    viewpoints separates them. Converged clouds are barely affected and 0
    disables the mechanism entirely.
    """

    n_particles: int = 500
    sigma_init_pos: float = 5.0 / math.sqrt(2.0 * math.log(20.0))
    sigma_init_heading: float = (2.0 * math.pi / 180.0) / 1.96
    sigma_lat: float = 0.1
    sigma_lon: float = 0.1
    gate_distance: float = 0.5
    process_noise_v: float = 0.2
    process_noise_yaw_rate: float = 0.02
    convergence_boost: float = 0.5
    yaw_rate_epsilon: float = 1e-6
    weight_floor: float = 1e-30
    merge_frames: int = 3
    sensor_range: float = 30.0
    ess_skip_ratio: float = 0.0

    def __post_init__(self) -> None:
        if self.n_particles < 10:
            raise ValueError("n_particles must be >= 10")
        if not (self.sigma_lat > 0.0 and self.sigma_lon > 0.0):
            raise ValueError("sigma_lat and sigma_lon must be > 0")
        for name in ("sigma_init_pos", "sigma_init_heading", "process_noise_v", "process_noise_yaw_rate"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")
        if not self.gate_distance > 0.0:
            raise ValueError("gate_distance must be > 0")
        if not self.weight_floor > 0.0:
            raise ValueError("weight_floor must be > 0")
        if self.merge_frames < 1:
            raise ValueError("merge_frames must be >= 1")
        if not self.sensor_range > 0.0:
            raise ValueError("sensor_range must be > 0")


@dataclass(frozen=True)
class Particle:
    pose: Pose
    weight: float


class ParticleSet:
    """Particle poses as an (N, 3) array plus an (N,) weight vector."""

    __slots__ = ("poses", "weights")

    def __init__(self, poses: np.ndarray, weights: np.ndarray) -> None:
        self.poses = np.asarray(poses, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        if self.poses.shape != (self.weights.size, 3):
            raise ValueError("poses must be (N, 3) matching the weight vector")

    def __len__(self) -> int:
        return self.weights.size

    def __getitem__(self, i: int) -> Particle:
        e, n, psi = self.poses[i]
        return Particle(Pose(e, n, psi), float(self.weights[i]))

    def particles(self) -> list[Particle]:
        return [self[i] for i in range(len(self))]

    def copy(self) -> "ParticleSet":
        return ParticleSet(self.poses.copy(), self.weights.copy())

    def position_spread(self) -> float:
        """Weighted radial standard deviation of the particle positions."""
        w = self.weights / self.weights.sum()
        mean_e = float(w @ self.poses[:, 0])
        mean_n = float(w @ self.poses[:, 1])
        de = self.poses[:, 0] - mean_e
        dn = self.poses[:, 1] - mean_n
        return float(math.sqrt(w @ (de * de + dn * dn)))

    def mean_position(self) -> tuple[float, float]:
        w = self.weights / self.weights.sum()
        return float(w @ self.poses[:, 0]), float(w @ self.poses[:, 1])


class AssociationPair(NamedTuple):
    obs_index: int
    landmark_id: int
    d_lat: float
    d_lon: float


@dataclass(frozen=True)
class Association:
    """One-to-one landmark pairing result; landmark ids are unique within."""

    pairs: tuple[AssociationPair, ...]

    def __len__(self) -> int:
        return len(self.pairs)


def initialize(initial: Pose, params: FilterParams, rng: np.random.Generator) -> ParticleSet:
    """Sample N particles around the initial fix with uniform weights.

    Draw order is fixed (eastings, northings, headings) so a seeded
    generator reproduces the set bit-identically.
    """
    n = params.n_particles
    poses = np.empty((n, 3), dtype=float)
    poses[:, 0] = rng.normal(initial.e, params.sigma_init_pos, n)
    poses[:, 1] = rng.normal(initial.n, params.sigma_init_pos, n)
    poses[:, 2] = normalize_angles(rng.normal(initial.psi, params.sigma_init_heading, n))
    return ParticleSet(poses, np.full(n, 1.0 / n))


def _propagate(poses: np.ndarray, v: np.ndarray, yaw_rate: np.ndarray, dt: float, eps: float) -> np.ndarray:
    """Constant-twist arc step applied to every pose row (shared by the
    scalar and vectorized entry points so both round identically)."""
    psi = poses[:, 2]
    dpsi = yaw_rate * dt
    arc = np.abs(yaw_rate) >= eps
    safe = np.where(arc, yaw_rate, 1.0)
    sin0, cos0 = np.sin(psi), np.cos(psi)
    sin1, cos1 = np.sin(psi + dpsi), np.cos(psi + dpsi)
    de = np.where(arc, v / safe * (sin1 - sin0), v * dt * cos0)
    dn = np.where(arc, v / safe * (cos0 - cos1), v * dt * sin0)
    out = np.empty_like(poses)
    out[:, 0] = poses[:, 0] + de
    out[:, 1] = poses[:, 1] + dn
    out[:, 2] = normalize_angles(psi + dpsi)
    return out


def dead_reckon(pose: Pose, v: float, yaw_rate: float, dt: float, yaw_rate_epsilon: float = 1e-6) -> Pose:
    """Noise-free single-pose dead reckoning with the filter's arc model."""
    row = _propagate(
        np.array([[pose.e, pose.n, pose.psi]]),
        np.array([float(v)]),
        np.array([float(yaw_rate)]),
        float(dt),
        yaw_rate_epsilon,
    )[0]
    return Pose(row[0], row[1], row[2])


def motion_update(
    particles: ParticleSet,
    sample,
    dt: float,
    params: FilterParams,
    rng: np.random.Generator,
) -> ParticleSet:
    """Propagate every particle over ``dt`` with per-particle perturbed
    speed and yaw rate; weights are untouched.

    Noise vectors are drawn sequentially (speed first, then yaw rate) from
    the supplied generator.
    """
    if not dt > 0.0:
        raise ValueError("dt must be > 0")
    n = len(particles)
    v = sample.v + rng.normal(0.0, params.process_noise_v, n)
    yaw = sample.yaw_rate + rng.normal(0.0, params.process_noise_yaw_rate, n)
    poses = _propagate(particles.poses, v, yaw, float(dt), params.yaw_rate_epsilon)
    return ParticleSet(poses, particles.weights.copy())


def landmark_likelihood(d_lat: float, d_lon: float, sigma_lat: float, sigma_lon: float) -> float:
    """Pairing likelihood: bivariate Gaussian in lateral/longitudinal error."""
    gamma = (d_lat / sigma_lat) ** 2 + (d_lon / sigma_lon) ** 2
    return math.exp(-0.5 * gamma) / (2.0 * math.pi * sigma_lat * sigma_lon)


def _lat_lon(dx, dy, heading: float):
    """Split a map-frame error vector across/along a heading."""
    c = np.cos(np.float64(heading))
    s = np.sin(np.float64(heading))
    return dy * c - dx * s, dx * c + dy * s  # (lateral, longitudinal)


def associate(
    obs_map_frame: Sequence[Point2] | np.ndarray,
    candidates: Sequence[Landmark],
    gate: float,
    heading: float = 0.0,
) -> Association:
    """Pair each candidate landmark with its nearest observation.

    A kd-tree is built over the observations and every candidate queries
    it; pairs farther than ``gate`` are dropped. A landmark appears at most
    once (its single nearest observation, so of several in-gate candidates
    only the closest is kept); one observation may serve several landmarks.
    ``heading`` orients the lateral/longitudinal error split.
    """
    obs = points_to_xy(obs_map_frame)
    if obs.shape[0] == 0 or not candidates:
        return Association(())
    index = NNIndex(obs)
    pairs = []
    for lm in candidates:
        j, dist = index.nearest_index(lm.position)
        if dist <= gate:
            dx = obs[j, 0] - lm.position.x
            dy = obs[j, 1] - lm.position.y
            d_lat, d_lon = _lat_lon(dx, dy, heading)
            pairs.append(AssociationPair(j, lm.id, float(d_lat), float(d_lon)))
    return Association(tuple(pairs))


def measurement_update(
    particles: ParticleSet,
    observations: Sequence[Point2] | np.ndarray,
    lot_map: LandmarkMap,
    params: FilterParams,
    margin_floor: float = 2.0,
) -> ParticleSet:
    """Reweight particles against the corner map (batched over particles).

    Per particle the observations are rotated/translated into the map frame
    (x' = x cos psi - y sin psi + E, y' = x sin psi + y cos psi + N), each
    visible landmark takes its nearest transformed observation, pairs beyond
    the gate are dropped, and the weight becomes the product of the matched
    pair likelihoods. Particles with no match receive ``weight_floor``.
    Weights are finally normalized to sum 1.

    Raises :class:`NoLandmarksVisible` when no landmark lies within sensor
    range (plus margin) of the current position estimate.
    """
    center_e, center_n = particles.mean_position()
    spread = particles.position_spread()
    margin = max(3.0 * spread, margin_floor)
    boost = params.convergence_boost * spread
    sigma_lat = math.hypot(params.sigma_lat, boost)
    sigma_lon = math.hypot(params.sigma_lon, boost)
    gate = params.gate_distance
    candidates = select_visible(
        lot_map, Pose(center_e, center_n, 0.0), params.sensor_range, margin
    )
    if not candidates:
        raise NoLandmarksVisible(
            f"no landmark within {params.sensor_range + margin:.1f} m of "
            f"({center_e:.1f}, {center_n:.1f})"
        )

    obs = points_to_xy(observations)
    n = len(particles)
    if obs.shape[0] == 0:
        return ParticleSet(particles.poses.copy(), np.full(n, 1.0 / n))

    cand_xy = points_to_xy([lm.position for lm in candidates])
    # A landmark farther from the cloud center than the farthest observation
    # plus margin plus gate cannot pair with anything; drop it early.
    obs_reach = float(np.sqrt(np.max(obs[:, 0] ** 2 + obs[:, 1] ** 2)))
    cd = np.sqrt((cand_xy[:, 0] - center_e) ** 2 + (cand_xy[:, 1] - center_n) ** 2)
    keep = cd <= obs_reach + margin + gate
    cand_xy = cand_xy[keep]
    if cand_xy.shape[0] == 0:
        return ParticleSet(particles.poses.copy(), np.full(n, 1.0 / n))

    cos_p = np.cos(particles.poses[:, 2])
    sin_p = np.sin(particles.poses[:, 2])
    # Same operation order as geometry.transform_to_map, so the transform
    # agrees bit-for-bit with the scalar path.
    obs_e = obs[None, :, 0] * cos_p[:, None] - obs[None, :, 1] * sin_p[:, None] + particles.poses[:, 0, None]
    obs_n = obs[None, :, 0] * sin_p[:, None] + obs[None, :, 1] * cos_p[:, None] + particles.poses[:, 1, None]

    # Nearest observation per (particle, landmark): argmin over the expanded
    # squared distance, then exact distances for the selected pairs.
    obs_sq = obs_e * obs_e + obs_n * obs_n  # (N, J)
    cand_sq = cand_xy[:, 0] ** 2 + cand_xy[:, 1] ** 2  # (L,)
    cross = np.stack((obs_e, obs_n), axis=2).reshape(n * obs.shape[0], 2) @ cand_xy.T
    cross = cross.reshape(n, obs.shape[0], -1)  # (N, J, L)
    d2 = obs_sq[:, :, None] - 2.0 * cross + cand_sq[None, None, :]
    jstar = np.argmin(d2, axis=1)  # (N, L), ties -> smallest index

    dx = np.take_along_axis(obs_e, jstar, axis=1) - cand_xy[None, :, 0]
    dy = np.take_along_axis(obs_n, jstar, axis=1) - cand_xy[None, :, 1]
    dist = np.sqrt(dx * dx + dy * dy)
    matched = dist <= gate

    d_lat = dy * cos_p[:, None] - dx * sin_p[:, None]
    d_lon = dx * cos_p[:, None] + dy * sin_p[:, None]
    gamma = (d_lat / sigma_lat) ** 2 + (d_lon / sigma_lon) ** 2
    # The match bonus stays at the nominal measurement scale even while the
    # sigmas are boosted: an inflated-sigma peak drops below one, which
    # would turn every additional matched pair into a penalty and make the
    # filter prefer poses that explain nothing.
    log_peak = -math.log(2.0 * math.pi * params.sigma_lat * params.sigma_lon)
    log_g = np.where(matched, log_peak - 0.5 * gamma, 0.0)
    n_matched = matched.sum(axis=1)
    log_w = log_g.sum(axis=1)
    log_w[n_matched == 0] = math.log(params.weight_floor)

    w = np.exp(log_w - log_w.max())
    w /= w.sum()
    return ParticleSet(particles.poses.copy(), w)


def resample(particles: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Draw N particles i.i.d. with probability weight_i / sum(weights).

    The drawn copies carry uniform weight 1/N. Raises
    :class:`AllZeroWeightsError` when the weights sum to zero (upstream
    weight-floor misconfiguration).
    """
    w = particles.weights
    total = w.sum()
    if not (np.isfinite(total) and total > 0.0):
        raise AllZeroWeightsError("particle weights sum to zero")
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(len(particles)), side="right")
    idx = np.minimum(idx, len(particles) - 1)
    return ParticleSet(particles.poses[idx].copy(), np.full(len(particles), 1.0 / len(particles)))


def effective_sample_size(particles: ParticleSet) -> float:
    w = particles.weights / particles.weights.sum()
    return float(1.0 / np.sum(w * w))


def estimate(particles: ParticleSet) -> Pose:
    """Pose of the highest-weight particle (lowest index wins ties)."""
    if len(particles) == 0:
        raise ValueError("empty particle set")
    i = int(np.argmax(particles.weights))
    e, n, psi = particles.poses[i]
    return Pose(e, n, psi)


def _merge_xy(frames: Sequence[np.ndarray], relative_motions: Sequence[Pose]) -> np.ndarray:
    if len(relative_motions) != max(len(frames) - 1, 0):
        raise ValueError("need exactly one relative motion between consecutive frames")
    if not frames:
        return np.empty((0, 2))
    merged = []
    # to_newest[j] = pose of the newest frame expressed in frame j.
    to_newest = Pose(0.0, 0.0, 0.0)
    transforms = [to_newest]
    for delta in reversed(relative_motions):
        to_newest = compose(delta, to_newest)
        transforms.append(to_newest)
    transforms.reverse()
    for xy, tf in zip(frames, transforms):
        merged.append(transform_xy(invert(tf), points_to_xy(xy)))
    return np.concatenate(merged, axis=0)


def merge_frames(
    frames: Sequence[Sequence[Point2] | np.ndarray],
    relative_motions: Sequence[Pose],
) -> list[Point2]:
    """Re-express older frames in the newest sensor frame and concatenate.

    ``relative_motions[i]`` is the dead-reckoned pose of frame ``i+1``'s
    sensor expressed in frame ``i``. Merging happens on raw scan points,
    before segmentation, so the densified cloud helps core-point detection.
    """
    merged = _merge_xy([points_to_xy(f) for f in frames], relative_motions)
    return [Point2(float(x), float(y)) for x, y in merged]


class FrameMerger:
    """Rolling buffer of the most recent scans and their relative motions."""

    def __init__(self, max_frames: int) -> None:
        if max_frames < 1:
            raise ValueError("max_frames must be >= 1")
        self._frames: deque[np.ndarray] = deque(maxlen=max_frames)
        self._deltas: deque[Pose] = deque(maxlen=max(max_frames - 1, 1))

    def push(self, xy: np.ndarray, delta_from_previous: Pose | None) -> None:
        if self._frames and delta_from_previous is None:
            raise ValueError("relative motion required after the first frame")
        if len(self._frames) == self._frames.maxlen:
            self._frames.popleft()
            if self._deltas:
                self._deltas.popleft()
        if self._frames:
            self._deltas.append(delta_from_previous)
        self._frames.append(points_to_xy(xy))

    def merged_xy(self) -> np.ndarray:
        return _merge_xy(list(self._frames), list(self._deltas))


class ParticleFilter:
    """Stateful wrapper sequencing motion updates, measurement updates and
    resampling; external synchronization is required (one update at a time).
    """

    def __init__(
        self,
        initial: Pose,
        params: FilterParams,
        lot_map: LandmarkMap,
        rng: np.random.Generator,
        start_time: float = 0.0,
    ) -> None:
        self.params = params
        self.lot_map = lot_map
        self.rng = rng
        self.particles = initialize(initial, params, rng)
        self._last_time = float(start_time)
        self._resampled_once = False

    def on_odometry(self, sample) -> None:
        dt = sample.timestamp - self._last_time
        if dt <= 0.0:
            raise ValueError(f"non-increasing odometry timestamp {sample.timestamp!r}")
        self.particles = motion_update(self.particles, sample, dt, self.params, self.rng)
        self._last_time = float(sample.timestamp)

    def on_observations(self, observations) -> Pose:
        """Measurement update, pose estimate, then resampling."""
        margin_floor = 2.0 if self._resampled_once else 6.0
        weighted = measurement_update(
            self.particles, observations, self.lot_map, self.params, margin_floor
        )
        best = estimate(weighted)
        ratio = self.params.ess_skip_ratio
        if ratio > 0.0 and effective_sample_size(weighted) > ratio * len(weighted):
            self.particles = weighted
        else:
            self.particles = resample(weighted, self.rng)
            self._resampled_once = True
        return best
