"""Trajectory CSV (UAMTra2Flow schema) and small artifact helpers."""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

TRAJECTORY_COLUMNS = ("id", "time", "px", "py", "pz", "dest_px", "dest_py", "dest_pz")


class DataIntegrityError(ValueError):
    """Malformed or inconsistent trajectory data."""


class TrajectoryRecord(NamedTuple):
    id: int
    time: float
    px: float
    py: float
    pz: float
    dest_px: float
    dest_py: float
    dest_pz: float


@dataclass
class Trajectory:
    """Columnar trajectory table: one row per (drone, time)."""

    ids: np.ndarray  # int64 (n,)
    times: np.ndarray  # float (n,)
    pos: np.ndarray  # (n, 3)
    dest: np.ndarray  # (n, 3)

    def __len__(self) -> int:
        return len(self.ids)

    @classmethod
    def empty(cls) -> "Trajectory":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros((0, 3)), np.zeros((0, 3)))

    @classmethod
    def from_records(cls, records: Iterable[TrajectoryRecord]) -> "Trajectory":
        rows = list(records)
        if not rows:
            return cls.empty()
        arr = np.array([r[1:] for r in rows], dtype=float)
        return cls(np.array([r[0] for r in rows], dtype=np.int64), arr[:, 0], arr[:, 1:4].copy(), arr[:, 4:7].copy())

    def records(self) -> Iterator[TrajectoryRecord]:
        for k in range(len(self)):
            p, d = self.pos[k], self.dest[k]
            yield TrajectoryRecord(int(self.ids[k]), float(self.times[k]), float(p[0]), float(p[1]), float(p[2]),
                                   float(d[0]), float(d[1]), float(d[2]))

    def sorted(self, by: str = "id") -> "Trajectory":
        """Sort by (id, time) or (time, id); stable."""
        keys = (self.times, self.ids) if by == "id" else (self.ids, self.times)
        order = np.lexsort(keys)
        return self.take(order)

    def take(self, index) -> "Trajectory":
        return Trajectory(self.ids[index], self.times[index], self.pos[index], self.dest[index])

    def equals(self, other: "Trajectory") -> bool:
        return (len(self) == len(other) and np.array_equal(self.ids, other.ids)
                and np.array_equal(self.times, other.times) and np.array_equal(self.pos, other.pos)
                and np.array_equal(self.dest, other.dest))


def fmt_float(x: float) -> str:
    """Shortest round-trip text; integral values drop the trailing '.0'."""
    x = float(x)
    if x == 0.0:
        return "0"
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trajectory_to_text(traj: Trajectory) -> str:
    out = [",".join(TRAJECTORY_COLUMNS)]
    ids, times, pos, dest = traj.ids.tolist(), traj.times.tolist(), traj.pos.tolist(), traj.dest.tolist()
    f = fmt_float
    for k in range(len(ids)):
        p, d = pos[k], dest[k]
        out.append(f"{ids[k]},{f(times[k])},{f(p[0])},{f(p[1])},{f(p[2])},{f(d[0])},{f(d[1])},{f(d[2])}")
    return "\n".join(out) + "\n"


def write_trajectory(traj, path) -> None:
    if not isinstance(traj, Trajectory):
        traj = Trajectory.from_records(traj)
    try:
        atomic_write_text(path, trajectory_to_text(traj))
    except OSError as exc:
        raise OSError(f"cannot write trajectory to {path}: {exc}") from exc


def read_trajectory(path, expected_dt: float = 0.1, radius: float = 1.0, sphere_tol: float = 0.02,
                    snap_tol: float = 0.2) -> Trajectory:
    """Parse and validate a trajectory CSV; rows come back sorted by (id, time).

    Times are snapped to the ``expected_dt`` grid (rows further than
    ``snap_tol * dt`` from it are rejected); positions must lie within
    ``sphere_tol`` relative of the sphere. Any problem raises
    DataIntegrityError naming the 1-based line number.
    """
    path = Path(path)
    ids, steps, vals, lines = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRAJECTORY_COLUMNS:
            raise DataIntegrityError(f"{path}:1: header must be {','.join(TRAJECTORY_COLUMNS)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRAJECTORY_COLUMNS):
                raise DataIntegrityError(f"{path}:{lineno}: expected {len(TRAJECTORY_COLUMNS)} fields, got {len(row)}")
            try:
                i = int(row[0])
                v = [float(x) for x in row[1:]]
            except ValueError as exc:
                raise DataIntegrityError(f"{path}:{lineno}: unparsable value ({exc})") from None
            if not all(math.isfinite(x) for x in v):
                raise DataIntegrityError(f"{path}:{lineno}: non-finite value")
            t = v[0]
            if t < 0:
                raise DataIntegrityError(f"{path}:{lineno}: negative time {t}")
            step = round(t / expected_dt)
            if abs(t - step * expected_dt) > snap_tol * expected_dt:
                raise DataIntegrityError(f"{path}:{lineno}: time {t} is off the {expected_dt} s grid")
            r = math.sqrt(v[1] ** 2 + v[2] ** 2 + v[3] ** 2)
            if abs(r - radius) > sphere_tol * radius:
                raise DataIntegrityError(f"{path}:{lineno}: position norm {r:.6g} off sphere radius {radius}")
            ids.append(i)
            steps.append(step)
            vals.append(v)
            lines.append(lineno)

    if not ids:
        return Trajectory.empty()
    ids_a = np.array(ids, dtype=np.int64)
    steps_a = np.array(steps, dtype=np.int64)
    vals_a = np.array(vals, dtype=float)
    order = np.lexsort((steps_a, ids_a))
    # validate in file order per drone first so diagnostics point at the offending row
    last: dict[int, tuple[int, int]] = {}
    for k in range(len(ids)):
        i, s = ids[k], steps[k]
        if i in last:
            prev, prev_line = last[i]
            if s <= prev:
                raise DataIntegrityError(f"{path}:{lines[k]}: non-monotone or duplicate time for drone {i} "
                                         f"(line {prev_line})")
            if s != prev + 1:
                raise DataIntegrityError(f"{path}:{lines[k]}: time gap of {(s - prev) * expected_dt:.6g} s for "
                                         f"drone {i} (expected {expected_dt} s)")
        last[i] = (s, lines[k])
    ids_a, steps_a, vals_a = ids_a[order], steps_a[order], vals_a[order]
    times = np.round(steps_a * expected_dt, 9)
    return Trajectory(ids_a, times, vals_a[:, 1:4].copy(), vals_a[:, 4:7].copy())


def project_to_sphere(traj: Trajectory, radius: float = 1.0) -> Trajectory:
    """Copy with positions and destinations rescaled onto the sphere."""
    def proj(a):
        n = np.linalg.norm(a, axis=1)
        n = np.where(n == 0.0, 1.0, n)
        return a * (radius / n)[:, None]
    return Trajectory(traj.ids.copy(), traj.times.copy(), proj(traj.pos), proj(traj.dest))
