"""End-to-end experiment orchestration and error evaluation.

``simulate_records`` drives the simulator (100 Hz odometry, 5 Hz scans by
default) and yields the sensor stream; ``run_localization`` replays such a
stream through the full pipeline (merge frames, segment, fit rectangles,
extract corners, measurement update, resample) and scores the estimates
against the TRUTH records. ``run_experiment`` chains the two in memory.

Randomness: the configured seed spawns two independent child streams, one
for the simulated sensors and one for the filter, so a localization replay
from a written log consumes exactly the same filter stream as the
in-process run and produces a byte-identical trace.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from lotloc.config import RunConfig
from lotloc.geometry import LaserScan, OdometrySample, Pose, normalize_angle, scan_to_xy
from lotloc.landmarks import LandmarkMap, build_map_from_world, load_map
from lotloc.lshape import extract_corner_observations
from lotloc.mcl import FrameMerger, NoLandmarksVisible, ParticleFilter, dead_reckon
from lotloc.segmentation import segment
from lotloc.sensorlog import InitRecord, LogRecord, TruthRecord
from lotloc.trajectory import TrajectoryPlan, TrajectorySpec, default_route, load_waypoints
from lotloc.worldsim import (
    WorldModel,
    default_lot,
    load_world,
    noisy_initial_fix,
    raycast_scan,
    sample_odometry,
)

TRACE_HEADER = "t,e_lon,e_lat,e_psi_deg"


class AlignmentGapError(ValueError):
    """An estimate has no ground-truth sample within the alignment window."""


@dataclass(frozen=True)
class ErrorRecord:
    t: float
    e_lon: float
    e_lat: float
    e_psi_deg: float

    @property
    def position_error(self) -> float:
        return math.hypot(self.e_lon, self.e_lat)


@dataclass(frozen=True)
class ErrorSummary:
    mean_abs_lon: float
    mean_abs_lat: float
    mean_abs_psi_deg: float
    max_abs_lon: float
    max_abs_lat: float
    max_abs_psi_deg: float
    n_records: int


@dataclass(frozen=True)
class ErrorTrace:
    """Per-estimate localization errors in the ground-truth heading frame."""

    records: tuple[ErrorRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def convergence_time(self, threshold: float = 0.2) -> float | None:
        """First instant after which the position error stays below the
        threshold; None when it never does (or there are no records)."""
        last_bad = None
        for i, rec in enumerate(self.records):
            if rec.position_error >= threshold:
                last_bad = i
        if not self.records:
            return None
        if last_bad is None:
            return self.records[0].t
        if last_bad == len(self.records) - 1:
            return None
        return self.records[last_bad + 1].t

    def summary(self, post_convergence: bool = False, threshold: float = 0.2) -> ErrorSummary:
        records = self.records
        if post_convergence:
            t0 = self.convergence_time(threshold)
            records = () if t0 is None else tuple(r for r in records if r.t >= t0)
        if not records:
            return ErrorSummary(*([math.nan] * 6), 0)
        lon = np.abs([r.e_lon for r in records])
        lat = np.abs([r.e_lat for r in records])
        psi = np.abs([r.e_psi_deg for r in records])
        return ErrorSummary(
            float(lon.mean()), float(lat.mean()), float(psi.mean()),
            float(lon.max()), float(lat.max()), float(psi.max()),
            len(records),
        )


def compute_errors(
    estimates: Sequence[tuple[float, Pose]],
    truths: Sequence[tuple[float, Pose]],
    max_gap: float = 0.010,
) -> ErrorTrace:
    """Score estimates against the nearest-in-time ground truth.

    The error vector is rotated into the ground-truth heading frame:
    ``e_lon`` along the true heading, ``e_lat`` across it; the heading
    error is reported in degrees. Raises :class:`AlignmentGapError` when no
    truth sample lies within ``max_gap`` seconds of an estimate.
    """
    if not truths:
        raise AlignmentGapError("no ground-truth samples at all")
    order = np.argsort([t for t, _ in truths], kind="stable")
    truth_t = np.asarray([truths[i][0] for i in order])
    truth_poses = [truths[i][1] for i in order]

    records = []
    for t, est in sorted(estimates, key=lambda te: te[0]):
        i = int(np.searchsorted(truth_t, t))
        best, best_dt = None, math.inf
        for j in (i - 1, i):
            if 0 <= j < truth_t.size and abs(truth_t[j] - t) < best_dt:
                best, best_dt = j, abs(truth_t[j] - t)
        if best is None or best_dt > max_gap + 1e-12:
            raise AlignmentGapError(f"no truth within {max_gap} s of estimate at t={t!r}")
        truth = truth_poses[best]
        err_e = est.e - truth.e
        err_n = est.n - truth.n
        c, s = math.cos(truth.psi), math.sin(truth.psi)
        records.append(
            ErrorRecord(
                t=float(t),
                e_lon=err_e * c + err_n * s,
                e_lat=-err_e * s + err_n * c,
                e_psi_deg=math.degrees(normalize_angle(est.psi - truth.psi)),
            )
        )
    return ErrorTrace(tuple(records))


def write_trace(trace: ErrorTrace, path: str | Path) -> None:
    lines = [TRACE_HEADER]
    for r in trace.records:
        lines.append(f"{r.t!r},{r.e_lon!r},{r.e_lat!r},{r.e_psi_deg!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trace(path: str | Path) -> ErrorTrace:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise ValueError(f"{path}: expected header {TRACE_HEADER!r}")
    records = []
    for line_no, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"{path}:{line_no}: expected 4 columns")
        records.append(ErrorRecord(*(float(p) for p in parts)))
    return ErrorTrace(tuple(records))


def build_world(config: RunConfig) -> WorldModel:
    return default_lot() if config.world == "default" else load_world(config.world)


def build_map(config: RunConfig, world: WorldModel) -> LandmarkMap:
    return build_map_from_world(world) if config.map == "from-world" else load_map(config.map)


def build_trajectory(config: RunConfig) -> TrajectorySpec:
    r = config.route
    common = dict(
        speed=r.speed,
        turn_radius=r.turn_radius,
        accel=r.accel,
        odom_rate=r.odom_rate,
        odom_sigma_v=r.odom_sigma_v,
        odom_sigma_yaw_rate=r.odom_sigma_yaw_rate,
    )
    if config.trajectory == "default":
        return default_route(loops=r.loops, **common)
    return TrajectorySpec(waypoints=load_waypoints(config.trajectory), **common)


def _rng_pair(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    sim_ss, filter_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(sim_ss), np.random.default_rng(filter_ss)


def simulate_records(config: RunConfig, world: WorldModel | None = None) -> list[LogRecord]:
    """Generate the full sensor stream for one simulated drive."""
    world = world if world is not None else build_world(config)
    spec = build_trajectory(config)
    plan = TrajectoryPlan(spec)
    sim_rng, _ = _rng_pair(config.seed)

    steps_per_scan = spec.odom_rate / config.lidar.rate
    if abs(steps_per_scan - round(steps_per_scan)) > 1e-9:
        raise ValueError("odometry rate must be an integer multiple of the LiDAR rate")
    steps_per_scan = int(round(steps_per_scan))

    n_steps = int(math.floor(plan.duration * spec.odom_rate))
    records: list[LogRecord] = []
    truth0, _ = plan.sample(0.0)
    records.append(
        InitRecord(
            noisy_initial_fix(truth0, sim_rng, config.init.sigma_pos, config.init.sigma_heading),
            0.0,
        )
    )
    records.append(TruthRecord(truth0, 0.0))
    records.append(raycast_scan(world, truth0, config.lidar, sim_rng, timestamp=0.0))
    noise = (spec.odom_sigma_v, spec.odom_sigma_yaw_rate)
    for k in range(1, n_steps + 1):
        t = k / spec.odom_rate
        truth, twist = plan.sample(min(t, plan.duration))
        records.append(sample_odometry(twist, noise, sim_rng, t))
        records.append(TruthRecord(truth, t))
        if k % steps_per_scan == 0:
            records.append(raycast_scan(world, truth, config.lidar, sim_rng, timestamp=t))
    return records


def run_localization(
    records: Sequence[LogRecord],
    lot_map: LandmarkMap,
    config: RunConfig,
) -> ErrorTrace:
    """Replay a sensor stream through the localization pipeline."""
    if not records or not isinstance(records[0], InitRecord):
        raise ValueError("sensor stream must start with an INIT record")
    init = records[0]
    _, filter_rng = _rng_pair(config.seed)
    pf = ParticleFilter(init.pose, config.filter, lot_map, filter_rng, start_time=init.timestamp)
    merger = FrameMerger(config.filter.merge_frames)

    estimates: list[tuple[float, Pose]] = []
    truths: list[tuple[float, Pose]] = []
    delta = Pose(0.0, 0.0, 0.0)  # dead-reckoned motion since the last scan
    last_t = float(init.timestamp)
    first_scan = True
    for record in records[1:]:
        if isinstance(record, TruthRecord):
            truths.append((record.timestamp, record.pose))
        elif isinstance(record, OdometrySample):
            dt = record.timestamp - last_t
            pf.on_odometry(record)
            delta = dead_reckon(
                delta, record.v, record.yaw_rate, dt, config.filter.yaw_rate_epsilon
            )
            last_t = float(record.timestamp)
        elif isinstance(record, LaserScan):
            merger.push(scan_to_xy(record), None if first_scan else delta)
            first_scan = False
            delta = Pose(0.0, 0.0, 0.0)
            merged = merger.merged_xy()
            ranges = np.sqrt(merged[:, 0] ** 2 + merged[:, 1] ** 2)
            clusters, _ = segment(merged, ranges, config.segmentation)
            observations = extract_corner_observations(clusters, config.lshape)
            try:
                est = pf.on_observations(observations)
            except NoLandmarksVisible as exc:
                raise NoLandmarksVisible(f"{exc} (at t={record.timestamp!r})") from exc
            estimates.append((record.timestamp, est))
        elif isinstance(record, InitRecord):
            raise ValueError("unexpected second INIT record")
    return compute_errors(estimates, truths)


def run_experiment(config: RunConfig) -> ErrorTrace:
    """Simulate a drive and localize against it, fully in memory."""
    world = build_world(config)
    lot_map = build_map(config, world)
    records = simulate_records(config, world)
    return run_localization(records, lot_map, config)
