import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uamflow import geom
from uamflow.io import DataIntegrityError, Trajectory
from uamflow.measure import (
    FlowDensitySamples,
    MeasureConfig,
    RegionPartition,
    accumulate,
    accumulate_raw,
    cell_area,
    cell_index,
    effective_step,
    read_samples,
    write_samples,
)


class TestCellIndex:
    def test_north_pole(self):
        assert cell_index([0, 0, 1], 7) == 0

    def test_equator_boundary_goes_up(self):
        assert cell_index([1, 0, 0], 2) == 2

    def test_south_pole_clamped(self):
        assert cell_index([0, 0, -1], 7) // 7 == 6

    @settings(max_examples=200)
    @given(st.floats(0, math.pi), st.floats(0, 2 * math.pi, exclude_max=True), st.integers(1, 12))
    def test_in_range(self, theta, phi, m):
        idx = cell_index(geom.from_spherical(theta, phi), m)
        assert 0 <= idx < m * m


class TestArea:
    def test_whole_sphere(self):
        assert cell_area(0, 1) == pytest.approx(4 * math.pi, rel=1e-15)

    def test_hemisphere_cell(self):
        assert cell_area(0, 2) == pytest.approx(math.pi, rel=1e-15)

    @pytest.mark.parametrize("m", [1, 2, 7, 11])
    def test_partition_of_unity(self, m):
        for eq in (False, True):
            total = math.fsum(RegionPartition(m, 2.0).areas(eq))
            assert abs(total - 16 * math.pi) <= 1e-9 * 16 * math.pi


class TestEffectiveStep:
    def test_halted(self):
        assert effective_step([1, 0, 0], [1, 0, 0], [0, 1, 0]) == 0.0

    def test_along_path(self):
        got = effective_step([1, 0, 0], [math.cos(0.05), math.sin(0.05), 0], [0, 1, 0])
        assert got == pytest.approx(math.sin(0.05), abs=1e-15)
        assert got == pytest.approx(0.0499792, abs=1e-7)

    def test_perpendicular(self):
        got = effective_step([1, 0, 0], [math.cos(0.05), 0, math.sin(0.05)], [0, 1, 0])
        assert abs(got) <= 1.3e-3

    def test_at_destination(self):
        assert effective_step([1, 0, 0], [0, 1, 0], [1, 0, 0]) == 0.0


def test_parked_drone():
    n = 100
    p = np.tile(geom.from_spherical(1.0, 2.0), (n + 1, 1))
    traj = Trajectory(np.ones(n + 1, dtype=np.int64), np.round(np.arange(n + 1) * 0.1, 9), p,
                      np.tile([0.0, 0, 1], (n + 1, 1)))
    s = accumulate(traj, MeasureConfig(trim_start=0.0))
    cell = cell_index(p[0], 7)
    assert s.k[cell] == pytest.approx(1.0 / s.area[cell], rel=1e-12)
    assert s.q[cell] == 0.0
    assert np.count_nonzero(s.k) == 1 and np.count_nonzero(s.q) == 0


def test_orbit_speed(orbit):
    s = accumulate(orbit(350), MeasureConfig(trim_start=0.0))
    nz = s.k > 0
    # each step covers arc 0.05 and projects to sin(0.05) on the tangent
    assert np.allclose(s.q[nz] / s.k[nz], math.sin(0.05) / 0.1, rtol=1e-12)


def test_time_conservation(orbit):
    two = orbit(500)
    other = orbit(500, lead=1.0, drone_id=2)
    traj = Trajectory(np.concatenate([two.ids, other.ids]), np.concatenate([two.times, other.times]),
                      np.vstack([two.pos, other.pos]), np.vstack([two.dest, other.dest]))
    acc = accumulate_raw(traj, MeasureConfig(trim_start=15.0))
    assert acc.n_steps == 350
    assert acc.n_pairs == 700
    counts = np.round(acc.time / 0.1).astype(int)
    assert counts.sum() == acc.n_pairs
    assert math.fsum(acc.time) == pytest.approx(acc.n_pairs * 0.1, rel=1e-15)


def test_trim_end(orbit):
    acc = accumulate_raw(orbit(500), MeasureConfig(trim_start=15.0, trim_end=5.0))
    assert acc.n_steps == 300


def test_gap_detected(orbit):
    tr = orbit(20)
    keep = np.ones(len(tr), dtype=bool)
    keep[7] = False
    with pytest.raises(DataIntegrityError, match="gap"):
        accumulate_raw(tr.take(keep), MeasureConfig(trim_start=0.0))


def test_samples_round_trip(tmp_path, orbit):
    a = accumulate(orbit(100), MeasureConfig(trim_start=0.0, m_bar=5), run="a")
    b = accumulate(orbit(100, lead=0.5), MeasureConfig(trim_start=0.0, m_bar=5), run="b")
    s = FlowDensitySamples.concat([a, b])
    write_samples(s, tmp_path / "s.csv")
    back = read_samples(tmp_path / "s.csv")
    assert back.m_bar == 5 and len(back) == 50
    assert np.array_equal(back.k, s.k) and np.array_equal(back.q, s.q)
    assert list(back.run[:2]) == ["a", "a"]
