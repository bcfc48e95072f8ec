"""Origin-destination demand generation for the three scenario types."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from enum import Enum

import numpy as np

from . import geom


class ScenarioType(str, Enum):
    RANDOM = "random"
    ZONED = "zoned"
    STATIONS = "stations"

    @classmethod
    def from_number(cls, n: int) -> "ScenarioType":
        return {1: cls.RANDOM, 2: cls.ZONED, 3: cls.STATIONS}[int(n)]

    @property
    def number(self) -> int:
        return {ScenarioType.RANDOM: 1, ScenarioType.ZONED: 2, ScenarioType.STATIONS: 3}[self]


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_type: ScenarioType = ScenarioType.RANDOM
    radius: float = 1.0
    n_drones: int = 4
    n_flights: int = 1000
    rng_seed: int = 0
    zone_half_angle: float = math.pi / 3

    def __post_init__(self):
        object.__setattr__(self, "scenario_type", ScenarioType(self.scenario_type))
        if self.n_drones < 1:
            raise ValueError("n_drones must be >= 1")
        if self.n_flights < 1:
            raise ValueError("n_flights must be >= 1")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")
        if self.scenario_type is ScenarioType.ZONED and not 0 < self.zone_half_angle < math.pi / 2:
            raise ValueError("zone_half_angle must lie in (0, pi/2)")

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={v.value if isinstance(v, Enum) else repr(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ScenarioConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or key not in types:
                raise ValueError(f"bad scenario config line: {raw!r}")
            if key == "scenario_type":
                kwargs[key] = ScenarioType(value)
            elif key in ("n_drones", "n_flights", "rng_seed"):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)


@dataclass
class FlightPlan:
    drone_id: int
    waypoints: np.ndarray  # (N + 1, 3); leg n runs waypoints[n] -> waypoints[n + 1]

    @property
    def n_legs(self) -> int:
        return len(self.waypoints) - 1

    @property
    def legs(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(self.waypoints[n], self.waypoints[n + 1]) for n in range(self.n_legs)]

    def origin(self, n: int) -> np.ndarray:
        return self.waypoints[n]

    def destination(self, n: int) -> np.ndarray:
        return self.waypoints[n + 1]


def drone_rng(seed: int, drone_id: int) -> np.random.Generator:
    # independent stream per (seed, drone); generation order does not matter
    return np.random.default_rng([int(seed), int(drone_id)])


def sample_uniform_sphere(rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
    while True:
        v = rng.standard_normal(3)
        n = np.linalg.norm(v)
        if n > 1e-12:
            return v * (radius / n)


def sample_cap(rng: np.random.Generator, half_angle: float, north: bool, radius: float = 1.0) -> np.ndarray:
    """Uniform point in the polar cap of the given half-angle."""
    z = rng.uniform(math.cos(half_angle), 1.0)
    phi = rng.uniform(0.0, 2.0 * math.pi)
    s = math.sqrt(max(0.0, 1.0 - z * z))
    p = np.array([s * math.cos(phi), s * math.sin(phi), z if north else -z])
    return p * radius


def station_points(radius: float = 1.0) -> np.ndarray:
    c = radius / math.sqrt(3.0)
    return np.array([[sx * c, sy * c, sz * c] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])


def _valid_leg(a: np.ndarray, b: np.ndarray, radius: float) -> bool:
    ang = float(geom._unit_angle(a, b))
    return 1e-9 < ang < math.pi - geom.ANTIPODAL_TOL


def gen_plan(cfg: ScenarioConfig, drone_id: int) -> FlightPlan:
    rng = drone_rng(cfg.rng_seed, drone_id)
    R = cfg.radius
    pts = np.empty((cfg.n_flights + 1, 3))

    if cfg.scenario_type is ScenarioType.STATIONS:
        stations = station_points(R)
        idx = int(rng.integers(8))
        pts[0] = stations[idx]
        for n in range(1, cfg.n_flights + 1):
            # opposite cube vertex is antipodal, so it is excluded with the current one
            choices = [j for j in range(8) if j != idx and j != 7 - idx]
            idx = choices[int(rng.integers(len(choices)))]
            pts[n] = stations[idx]
        return FlightPlan(drone_id, pts)

    def draw(n: int) -> np.ndarray:
        if cfg.scenario_type is ScenarioType.RANDOM:
            return sample_uniform_sphere(rng, R)
        north = (n + drone_id) % 2 == 0
        return sample_cap(rng, cfg.zone_half_angle, north, R)

    pts[0] = draw(0)
    for n in range(1, cfg.n_flights + 1):
        p = draw(n)
        while not _valid_leg(pts[n - 1], p, R):
            p = draw(n)
        pts[n] = p
    return FlightPlan(drone_id, pts)


def discretize_leg(origin, destination, v_bar: float, dt: float, radius: float = 1.0) -> np.ndarray:
    """Waypoints at arc spacing v_bar*dt along the leg; the last gap may be shorter."""
    step = v_bar * dt
    if not step > 0:
        raise ValueError("v_bar * dt must be positive")
    origin = np.asarray(origin, dtype=float)
    destination = np.asarray(destination, dtype=float)
    if not _valid_leg(origin, destination, radius):
        raise geom.DegenerateGeometryError("leg endpoints coincide or are antipodal")
    L = float(geom.gc_distance(origin, destination, radius))
    H = max(1, math.ceil(L / step - 1e-9))
    ell = np.minimum(np.arange(H + 1) * step / L, 1.0)
    ell[-1] = 1.0
    return geom.slerp(origin, destination, ell)
