"""Synchronous multi-drone simulation on the spherical airspace."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geom
from .control import ControlConfig, ControlLaw, circular_detour, neighbor_directions, pairwise_chords
from .io import Trajectory
from .scenario import FlightPlan, ScenarioConfig, gen_plan


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    dt: float = 0.1
    n_steps: int = 500
    cruise_speed: float = 0.5
    radius: float = 1.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not self.cruise_speed > 0:
            raise ValueError("cruise_speed must be positive")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.cruise_speed * self.dt >= math.pi * self.radius:
            raise ValueError("per-step arc must be shorter than half a great circle")
        if self.scenario.radius != self.radius:
            object.__setattr__(self, "scenario", replace(self.scenario, radius=self.radius))

    @property
    def step_arc(self) -> float:
        return self.cruise_speed * self.dt


@dataclass
class DroneState:
    id: int
    position: np.ndarray
    plan: FlightPlan
    leg: int = 0  # 0-based index of the current flight
    finished: bool = False

    @property
    def destination(self) -> np.ndarray:
        return self.plan.destination(min(self.leg, self.plan.n_legs - 1))


def init_states(cfg: SimConfig) -> list[DroneState]:
    states = []
    for drone_id in range(1, cfg.scenario.n_drones + 1):
        plan = gen_plan(cfg.scenario, drone_id)
        states.append(DroneState(drone_id, plan.origin(0).copy(), plan))
    return states


def _nominal_moves(pos: np.ndarray, dest: np.ndarray, arc: float, radius: float):
    """Great-circle step toward each destination; returns (new_pos, arrived)."""
    remaining = radius * geom._unit_angle(pos, dest)
    arrived = remaining <= arc * (1.0 + 1e-9)
    new = dest.copy()
    go = ~arrived
    if go.any():
        d = geom.tangent_dir(pos[go], dest[go])
        new[go] = geom.step_along(pos[go], d, arc, radius)
    return new, arrived


def step(states: list[DroneState], t: int, cfg: SimConfig) -> list[DroneState]:
    """Advance every unfinished drone by one time step from a frozen snapshot.

    Decisions read only start-of-step positions, so the result does not
    depend on the order drones are visited in.
    """
    active = [s for s in states if not s.finished]
    if not active:
        return states
    active.sort(key=lambda s: s.id)
    pos = np.array([s.position for s in active])
    dest = np.array([s.destination for s in active])
    arc, R = cfg.step_arc, cfg.radius
    ctl = cfg.control

    chords = pairwise_chords(pos)
    np.fill_diagonal(chords, np.inf)
    conflict = chords <= ctl.safe_spacing
    has_conflict = conflict.any(axis=1)

    try:
        nominal_pos, arrived = _nominal_moves(pos, dest, arc, R)
    except geom.DegenerateGeometryError as exc:
        raise SimulationError(f"step {t}: {exc}") from exc
    new_pos = nominal_pos
    nominal = np.ones(len(active), dtype=bool)

    for k in np.flatnonzero(has_conflict):
        if ctl.law is ControlLaw.STOP:
            # row order is id order, so a lower row index means higher priority
            if conflict[k, :k].any():
                new_pos[k] = pos[k]
                nominal[k] = False
            continue
        neigh = np.flatnonzero(conflict[k]) if ctl.sensing_radius is None else \
            np.flatnonzero(chords[k] <= ctl.sensing)
        try:
            decision = circular_detour(k, neigh.tolist(), pos, dest[k], ctl.n_candidates)
        except geom.DegenerateGeometryError as exc:
            raise SimulationError(f"drone {active[k].id}, step {t}: {exc}") from exc
        nominal[k] = False
        new_pos[k] = pos[k] if decision.halt else geom.step_along(pos[k], decision.direction, arc, R)

    out = []
    for k, s in enumerate(active):
        ns = DroneState(s.id, new_pos[k], s.plan, s.leg, False)
        if nominal[k] and arrived[k]:
            ns.leg += 1
            if ns.leg >= s.plan.n_legs:
                ns.leg = s.plan.n_legs - 1
                ns.finished = True
        out.append(ns)
    done = [s for s in states if s.finished]
    return sorted(out + done, key=lambda s: s.id)


def run(cfg: SimConfig, states: list[DroneState] | None = None) -> Trajectory:
    """Simulate ``cfg.n_steps`` steps; one record per drone per step while unfinished."""
    if states is None:
        states = init_states(cfg)
    ids, times, pos, dest = [], [], [], []
    logged_final: set[int] = set()

    def log(t: int):
        tt = round(t * cfg.dt, 9)
        for s in states:
            if s.finished:
                # the arrival at the final destination is logged once
                if s.id in logged_final:
                    continue
                logged_final.add(s.id)
            ids.append(s.id)
            times.append(tt)
            pos.append(s.position)
            dest.append(s.destination)

    log(0)
    for t in range(cfg.n_steps):
        states = step(states, t, cfg)
        log(t + 1)

    if not ids:
        return Trajectory.empty()
    traj = Trajectory(np.array(ids, dtype=np.int64), np.array(times), np.array(pos), np.array(dest))
    return traj.sorted(by="time")


# ---------------------------------------------------------------------------
# replay audits over a logged trajectory


def _by_time(traj: Trajectory):
    """Yield (snapshot_t, snapshot_t1) aligned on drones present at both times."""
    traj = traj.sorted(by="time")
    steps = np.round(traj.times / _infer_dt(traj)).astype(np.int64) if len(traj) else traj.ids
    bounds = np.flatnonzero(np.diff(steps)) + 1
    groups = np.split(np.arange(len(traj)), bounds)
    for a, b in zip(groups[:-1], groups[1:]):
        if steps[b[0]] != steps[a[0]] + 1:
            continue
        ids_a, ids_b = traj.ids[a], traj.ids[b]
        common = np.intersect1d(ids_a, ids_b)
        ia = a[np.searchsorted(ids_a, common)]
        ib = b[np.searchsorted(ids_b, common)]
        yield traj.ids[a], traj.pos[a], traj.dest[a], common, ia, ib, traj


def _infer_dt(traj: Trajectory) -> float:
    t = np.unique(traj.times)
    return float(np.min(np.diff(t))) if len(t) > 1 else 1.0


def audit_stop_yield(traj: Trajectory, safe_spacing: float) -> int:
    """Count steps where a drone moved although a higher-priority drone was within spacing."""
    violations = 0
    for ids_a, pos_a, _, common, ia, ib, tr in _by_time(traj):
        for idx_a, idx_b in zip(ia, ib):
            i = tr.ids[idx_a]
            higher = ids_a < i
            if not higher.any():
                continue
            d = np.linalg.norm(pos_a[higher] - tr.pos[idx_a], axis=1)
            if (d <= safe_spacing).any() and not np.array_equal(tr.pos[idx_b], tr.pos[idx_a]):
                violations += 1
    return violations


def audit_detour(traj: Trajectory, safe_spacing: float, tol: float = 1e-9) -> int:
    """Count conflicted steps whose heading points toward a conflicting neighbor."""
    violations = 0
    for ids_a, pos_a, _, common, ia, ib, tr in _by_time(traj):
        for idx_a, idx_b in zip(ia, ib):
            p, p1 = tr.pos[idx_a], tr.pos[idx_b]
            d = np.linalg.norm(pos_a - p, axis=1)
            mask = (d <= safe_spacing) & (ids_a != tr.ids[idx_a])
            if not mask.any() or np.array_equal(p, p1):
                continue
            heading = geom.tangent_dir(p, p1)
            toward = neighbor_directions(p, pos_a[mask])
            if len(toward) and np.max(toward @ heading) > tol:
                violations += 1
    return violations
