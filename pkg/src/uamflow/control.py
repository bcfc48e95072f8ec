"""Collision-avoidance control laws: stop-and-yield and circular detour."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from . import geom


class ControlLaw(str, Enum):
    STOP = "stop"
    DETOUR = "detour"


@dataclass(frozen=True)
class ControlConfig:
    law: ControlLaw = ControlLaw.STOP
    safe_spacing: float = 0.5
    n_candidates: int = 64
    sensing_radius: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "law", ControlLaw(self.law))
        if not self.safe_spacing > 0:
            raise ValueError("safe_spacing must be positive")
        if self.n_candidates < 4:
            raise ValueError("n_candidates must be >= 4")
        if self.sensing_radius is not None and not self.sensing_radius > 0:
            raise ValueError("sensing_radius must be positive")

    @property
    def sensing(self) -> float:
        return self.safe_spacing if self.sensing_radius is None else self.sensing_radius


@dataclass(frozen=True)
class ControlDecision:
    """Either Halt (direction is None) or Proceed along a unit tangent."""

    direction: Optional[np.ndarray] = None

    @property
    def halt(self) -> bool:
        return self.direction is None


HALT = ControlDecision(None)


def pairwise_chords(positions: np.ndarray) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def detect_conflicts(i: int, positions: np.ndarray, safe_spacing: float) -> list[int]:
    """Indices j != i with chord distance <= safe_spacing (boundary inclusive)."""
    positions = np.asarray(positions, dtype=float)
    d = geom.chord(positions[i], positions)
    return [j for j in np.flatnonzero(d <= safe_spacing).tolist() if j != i]


def stop_yield(i: int, conflicts, positions, dest) -> ControlDecision:
    """Halt if any conflicting drone has higher priority (smaller index)."""
    if any(j < i for j in conflicts):
        return HALT
    return ControlDecision(geom.tangent_dir(positions[i], dest))


def candidate_angles(n_candidates: int) -> np.ndarray:
    # open interval (0, 2*pi): both 0 and 2*pi excluded
    s = np.arange(1, n_candidates + 1)
    return 2.0 * math.pi * s / (n_candidates + 1)


def neighbor_directions(p: np.ndarray, others: np.ndarray) -> np.ndarray:
    """Tangent directions from p toward each neighbor; rows for coincident neighbors are dropped.

    A neighbor at exactly the same point cannot be approached, so it places
    no constraint on the heading.
    """
    r = np.linalg.norm(p)
    n = p / r
    perp = others - np.outer(others @ n, n)
    length = np.linalg.norm(perp, axis=1)
    keep = length > 1e-12 * r
    return perp[keep] / length[keep, None]


def circular_detour(i: int, conflicts, positions, dest, n_candidates: int = 64) -> ControlDecision:
    """Rotate the nominal heading to the safe sampled angle closest to it.

    A candidate is safe when it does not point toward any conflicting drone.
    Falls back to Halt when no sampled angle is safe.
    """
    positions = np.asarray(positions, dtype=float)
    p = positions[i]
    nominal = geom.tangent_dir(p, dest)
    axis = p / np.linalg.norm(p)
    psi = candidate_angles(n_candidates)
    rotated = geom.rodrigues_rotate(nominal, axis, psi)
    rotated /= np.linalg.norm(rotated, axis=1)[:, None]

    toward = neighbor_directions(p, positions[list(conflicts)])
    if len(toward):
        safe = np.all(rotated @ toward.T <= 0.0, axis=1)
    else:
        safe = np.ones(len(psi), dtype=bool)
    if not safe.any():
        return HALT
    align = rotated @ nominal
    align = np.where(safe, align, -np.inf)
    # ties (mirror-image angles, equal up to rounding) resolve to the smaller angle
    best = int(np.flatnonzero(align >= align.max() - 1e-12)[0])
    return ControlDecision(rotated[best])


def decide(i: int, positions: np.ndarray, dest: np.ndarray, cfg: ControlConfig, conflicts=None) -> ControlDecision:
    if conflicts is None:
        conflicts = detect_conflicts(i, positions, cfg.safe_spacing)
    if not conflicts:
        return ControlDecision(geom.tangent_dir(positions[i], dest))
    if cfg.law is ControlLaw.STOP:
        return stop_yield(i, conflicts, positions, dest)
    neigh = conflicts
    if cfg.sensing_radius is not None:
        neigh = detect_conflicts(i, positions, cfg.sensing)
    return circular_detour(i, neigh, positions, dest, cfg.n_candidates)
