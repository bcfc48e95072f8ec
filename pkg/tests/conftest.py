import math

import numpy as np
import pytest

from uamflow.io import Trajectory


def equator_orbit(n_steps: int, arc: float = 0.05, dt: float = 0.1, lead: float = math.pi / 2, drone_id: int = 1):
    """One drone circling the equator with its destination always ``lead`` radians ahead (closed form)."""
    t = np.arange(n_steps + 1)
    ang = arc * t
    pos = np.column_stack([np.cos(ang), np.sin(ang), np.zeros_like(ang)])
    dest = np.column_stack([np.cos(ang + lead), np.sin(ang + lead), np.zeros_like(ang)])
    times = np.round(t * dt, 9)
    return Trajectory(np.full(len(t), drone_id, dtype=np.int64), times, pos, dest)


@pytest.fixture
def orbit():
    return equator_orbit


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
