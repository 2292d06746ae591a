"""Sensor log serialization: one record per line, UTF-8 text.

    INIT,t,e,n,psi          once, first line
    ODO,t,v,yaw_rate        at the odometry rate
    TRUTH,t,e,n,psi         at the odometry rate, for evaluation only
    SCAN,t,start_bearing,step,r1,r2,...   at the LiDAR rate; inf = no return

Floats are rendered with ``repr`` (shortest exact form), so parsing a log
reproduces the original values bit-for-bit and replays are byte-identical.
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Union

import numpy as np

from lotloc.geometry import LaserScan, OdometrySample, Pose


class LogFormatError(ValueError):
    def __init__(self, line_no: int, message: str) -> None:
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class InitRecord:
    __slots__ = ("pose", "timestamp")

    def __init__(self, pose: Pose, timestamp: float) -> None:
        self.pose = pose
        self.timestamp = timestamp


class TruthRecord:
    __slots__ = ("pose", "timestamp")

    def __init__(self, pose: Pose, timestamp: float) -> None:
        self.pose = pose
        self.timestamp = timestamp


LogRecord = Union[InitRecord, TruthRecord, OdometrySample, LaserScan]


def _f(x: float) -> str:
    return repr(float(x))


def format_record(record: LogRecord) -> str:
    if isinstance(record, InitRecord):
        p = record.pose
        return f"INIT,{_f(record.timestamp)},{_f(p.e)},{_f(p.n)},{_f(p.psi)}"
    if isinstance(record, TruthRecord):
        p = record.pose
        return f"TRUTH,{_f(record.timestamp)},{_f(p.e)},{_f(p.n)},{_f(p.psi)}"
    if isinstance(record, OdometrySample):
        return f"ODO,{_f(record.timestamp)},{_f(record.v)},{_f(record.yaw_rate)}"
    if isinstance(record, LaserScan):
        ranges = ",".join(_f(r) for r in record.ranges)
        return f"SCAN,{_f(record.timestamp)},{_f(record.start_bearing)},{_f(record.angular_step)},{ranges}"
    raise TypeError(f"unknown record type {type(record)!r}")


def write_log(records: Iterable[LogRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(format_record(record))
            fh.write("\n")


def parse_record(line: str, line_no: int = 0) -> LogRecord:
    parts = line.split(",")
    kind = parts[0]
    try:
        if kind == "INIT" and len(parts) == 5:
            return InitRecord(Pose(float(parts[2]), float(parts[3]), float(parts[4])), float(parts[1]))
        if kind == "TRUTH" and len(parts) == 5:
            return TruthRecord(Pose(float(parts[2]), float(parts[3]), float(parts[4])), float(parts[1]))
        if kind == "ODO" and len(parts) == 4:
            return OdometrySample(v=float(parts[2]), yaw_rate=float(parts[3]), timestamp=float(parts[1]))
        if kind == "SCAN" and len(parts) >= 4:
            return LaserScan(
                timestamp=float(parts[1]),
                start_bearing=float(parts[2]),
                angular_step=float(parts[3]),
                ranges=np.array([float(p) for p in parts[4:]]),
            )
    except ValueError as exc:
        raise LogFormatError(line_no, str(exc)) from None
    raise LogFormatError(line_no, f"unrecognized record {line[:40]!r}")


def read_log(path: str | Path) -> list[LogRecord]:
    records: list[LogRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            records.append(parse_record(line, line_no))
    return records
