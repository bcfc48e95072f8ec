"""Edie flow/density samples over an equal-angle partition of the sphere."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import geom
from .io import DataIntegrityError, Trajectory, atomic_write_text, fmt_float, project_to_sphere

SAMPLE_COLUMNS = ("run", "region_id", "theta_bin", "phi_bin", "area_m2", "k", "q")


@dataclass(frozen=True)
class MeasureConfig:
    m_bar: int = 7
    trim_start: float = 15.0
    trim_end: float = 0.0
    dt: float = 0.1
    radius: float = 1.0
    equal_area: bool = False  # use the mean cell area 4*pi*R^2/M everywhere

    def __post_init__(self):
        if self.m_bar < 1:
            raise ValueError("m_bar must be >= 1")
        if self.trim_start < 0 or self.trim_end < 0:
            raise ValueError("trim values must be non-negative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")


@dataclass
class RegionPartition:
    m_bar: int
    radius: float = 1.0

    @property
    def n_cells(self) -> int:
        return self.m_bar * self.m_bar

    def areas(self, equal_area: bool = False) -> np.ndarray:
        if equal_area:
            return np.full(self.n_cells, 4.0 * math.pi * self.radius**2 / self.n_cells)
        band = np.array([cell_area(b, self.m_bar, self.radius) for b in range(self.m_bar)])
        return np.repeat(band, self.m_bar)


@dataclass
class FlowDensitySamples:
    """Per-cell Edie samples from one measured trajectory (or a pooled set)."""

    run: np.ndarray
    region_id: np.ndarray
    area: np.ndarray
    k: np.ndarray
    q: np.ndarray
    m_bar: int

    def __len__(self) -> int:
        return len(self.k)

    @property
    def theta_bin(self) -> np.ndarray:
        return self.region_id // self.m_bar

    @property
    def phi_bin(self) -> np.ndarray:
        return self.region_id % self.m_bar

    def nonzero(self) -> "FlowDensitySamples":
        keep = self.k > 0
        return FlowDensitySamples(self.run[keep], self.region_id[keep], self.area[keep], self.k[keep],
                                  self.q[keep], self.m_bar)

    @classmethod
    def concat(cls, parts: list["FlowDensitySamples"]) -> "FlowDensitySamples":
        if not parts:
            raise ValueError("nothing to concatenate")
        if len({p.m_bar for p in parts}) != 1:
            raise ValueError("cannot pool samples from different partitions")
        return cls(np.concatenate([p.run for p in parts]), np.concatenate([p.region_id for p in parts]),
                   np.concatenate([p.area for p in parts]), np.concatenate([p.k for p in parts]),
                   np.concatenate([p.q for p in parts]), parts[0].m_bar)


def cell_index(p, m_bar: int):
    theta, phi = geom.to_spherical(p)
    tb = np.clip(np.floor(theta / math.pi * m_bar).astype(np.int64), 0, m_bar - 1)
    pb = np.clip(np.floor(phi / (2.0 * math.pi) * m_bar).astype(np.int64), 0, m_bar - 1)
    idx = tb * m_bar + pb
    return int(idx) if np.ndim(idx) == 0 else idx


def cell_area(theta_bin: int, m_bar: int, radius: float = 1.0) -> float:
    if not 0 <= theta_bin < m_bar:
        raise ValueError("theta_bin out of range")
    lo = theta_bin * math.pi / m_bar
    hi = (theta_bin + 1) * math.pi / m_bar
    return radius * radius * (math.cos(lo) - math.cos(hi)) * (2.0 * math.pi / m_bar)


def effective_step(p_t, p_t1, dest):
    """Chord displacement projected on the tangent toward ``dest``.

    Rows where the drone sits on its destination contribute 0.
    """
    p_t = np.asarray(p_t, dtype=float)
    p_t1 = np.asarray(p_t1, dtype=float)
    dest = np.asarray(dest, dtype=float)
    r = np.sqrt(np.sum(p_t * p_t, axis=-1, keepdims=True))
    n = p_t / r
    perp = dest - np.sum(dest * n, axis=-1, keepdims=True) * n
    length = np.sqrt(np.sum(perp * perp, axis=-1, keepdims=True))
    ok = length > 1e-12 * r
    d = np.where(ok, perp / np.where(ok, length, 1.0), 0.0)
    out = np.sum((p_t1 - p_t) * d, axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass
class Accumulation:
    time: np.ndarray  # seconds per cell
    dist: np.ndarray  # effective metres per cell
    n_pairs: int
    n_steps: int  # T, the shared window length


def accumulate_raw(traj: Trajectory, cfg: MeasureConfig) -> Accumulation:
    """Per-cell time and effective distance over the trimmed window."""
    M = cfg.m_bar * cfg.m_bar
    if len(traj) == 0:
        return Accumulation(np.zeros(M), np.zeros(M), 0, 0)
    # rows accepted within the reader's tolerance are measured on the sphere itself
    traj = project_to_sphere(traj, cfg.radius)
    steps = np.round(traj.times / cfg.dt).astype(np.int64)
    if np.any(np.abs(traj.times - steps * cfg.dt) > 0.2 * cfg.dt):
        bad = int(np.argmax(np.abs(traj.times - steps * cfg.dt) > 0.2 * cfg.dt))
        raise DataIntegrityError(f"row {bad}: time {traj.times[bad]} is off the {cfg.dt} s grid")

    t_end = steps.max() * cfg.dt - cfg.trim_end
    keep = (traj.times >= cfg.trim_start - 1e-9) & (traj.times <= t_end + 1e-9)
    order = np.lexsort((steps, traj.ids))
    order = order[keep[order]]
    ids, st = traj.ids[order], steps[order]
    if len(order) == 0:
        return Accumulation(np.zeros(M), np.zeros(M), 0, 0)

    same = ids[1:] == ids[:-1]
    gap = st[1:] - st[:-1]
    bad = same & (gap != 1)
    if bad.any():
        k = int(np.flatnonzero(bad)[0]) + 1
        what = "duplicate or non-monotone" if gap[k - 1] <= 0 else f"gap of {gap[k - 1] * cfg.dt:.6g} s in"
        raise DataIntegrityError(f"drone {ids[k]} at time {st[k] * cfg.dt:.6g}: {what} timestamps")

    n_steps = int(st.max() - st.min())
    a = order[:-1][same]
    b = order[1:][same]
    p_t, p_t1, d_t = traj.pos[a], traj.pos[b], traj.dest[a]
    cells = cell_index(p_t, cfg.m_bar) if len(a) else np.zeros(0, dtype=np.int64)
    ds = effective_step(p_t, p_t1, d_t) if len(a) else np.zeros(0)
    time = np.bincount(cells, minlength=M) * cfg.dt
    dist = np.bincount(cells, weights=ds, minlength=M)
    return Accumulation(time, dist, int(len(a)), n_steps)


def accumulate(traj: Trajectory, cfg: MeasureConfig, run: str = "") -> FlowDensitySamples:
    """Edie density and flow for every cell of the partition (unvisited cells give zeros)."""
    acc = accumulate_raw(traj, cfg)
    part = RegionPartition(cfg.m_bar, cfg.radius)
    area = part.areas(cfg.equal_area)
    M = part.n_cells
    if acc.n_steps == 0:
        k = np.zeros(M)
        q = np.zeros(M)
    else:
        volume = area * cfg.dt * acc.n_steps
        k = acc.time / volume
        q = acc.dist / volume
    return FlowDensitySamples(np.full(M, run, dtype=object), np.arange(M), area, k, q, cfg.m_bar)


def samples_to_text(s: FlowDensitySamples) -> str:
    out = [",".join(SAMPLE_COLUMNS)]
    tb, pb = s.theta_bin.tolist(), s.phi_bin.tolist()
    for j in range(len(s)):
        out.append(f"{s.run[j]},{int(s.region_id[j])},{tb[j]},{pb[j]},{fmt_float(s.area[j])},"
                   f"{fmt_float(s.k[j])},{fmt_float(s.q[j])}")
    return "\n".join(out) + "\n"


def write_samples(s: FlowDensitySamples, path) -> None:
    atomic_write_text(path, samples_to_text(s))


def read_samples(path) -> FlowDensitySamples:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != SAMPLE_COLUMNS:
            raise DataIntegrityError(f"{path}:1: header must be {','.join(SAMPLE_COLUMNS)}")
        run, rid, bins, area, k, q = [], [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                run.append(row[0])
                rid.append(int(row[1]))
                bins.append(max(int(row[2]), int(row[3])))
                area.append(float(row[4]))
                k.append(float(row[5]))
                q.append(float(row[6]))
            except (ValueError, IndexError) as exc:
                raise DataIntegrityError(f"{path}:{lineno}: {exc}") from None
    # every cell is written, so the largest bin index fixes the partition size
    m_bar = max(bins) + 1 if bins else 1
    return FlowDensitySamples(np.array(run, dtype=object), np.array(rid, dtype=np.int64), np.array(area),
                              np.array(k), np.array(q), m_bar)
