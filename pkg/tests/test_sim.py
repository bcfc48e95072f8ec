import math

import numpy as np
import pytest

from uamflow import geom
from uamflow.control import ControlConfig, ControlLaw
from uamflow.scenario import FlightPlan, ScenarioConfig, ScenarioType
from uamflow.sim import DroneState, SimConfig, audit_detour, audit_stop_yield, run, step


def equator(phi):
    return np.array([math.cos(phi), math.sin(phi), 0.0])


def cfg_for(law=ControlLaw.STOP, spacing=0.5, n=2, steps=500, scenario=ScenarioType.RANDOM, seed=1):
    return SimConfig(ScenarioConfig(scenario, 1.0, n, 1000, seed), ControlConfig(law, spacing), 0.1, steps, 0.5, 1.0)


def test_single_leg_exact_arrival():
    plan = FlightPlan(1, np.array([equator(0.0), equator(1.0), equator(2.0)]))
    states = [DroneState(1, plan.origin(0).copy(), plan)]
    cfg = cfg_for(n=1)
    for t in range(19):
        states = step(states, t, cfg)
        assert states[0].leg == 0
    states = step(states, 19, cfg)
    assert np.array_equal(states[0].position, equator(1.0))
    assert states[0].leg == 1


def test_stop_head_on_lower_priority_holds():
    a, b = equator(0.0), equator(0.3)
    states = [DroneState(1, a, FlightPlan(1, np.array([a, b]))), DroneState(2, b, FlightPlan(2, np.array([b, a])))]
    out = step(states, 0, cfg_for(spacing=0.5))
    assert np.array_equal(out[1].position, b)
    assert geom.gc_distance(a, out[0].position) == pytest.approx(0.05, abs=1e-12)


def test_free_flow_advances_exact_arc():
    a, b = equator(0.0), equator(2.0)
    c, d = geom.from_spherical(0.3, 0.0), geom.from_spherical(0.3, 2.0)
    states = [DroneState(1, a, FlightPlan(1, np.array([a, b]))), DroneState(2, c, FlightPlan(2, np.array([c, d])))]
    out = step(states, 0, cfg_for(spacing=0.2))
    assert geom.gc_distance(a, out[0].position) == pytest.approx(0.05, abs=1e-12)
    assert geom.gc_distance(c, out[1].position) == pytest.approx(0.05, abs=1e-12)


def test_detour_head_on_both_move():
    a, b = equator(0.0), equator(0.3)
    states = [DroneState(1, a, FlightPlan(1, np.array([a, b]))), DroneState(2, b, FlightPlan(2, np.array([b, a])))]
    out = step(states, 0, cfg_for(ControlLaw.DETOUR, 0.6))
    assert not np.array_equal(out[0].position, a) and not np.array_equal(out[1].position, b)


def test_final_arrival_logged_once():
    a, b = equator(0.0), equator(0.12)
    plan = FlightPlan(1, np.array([a, b]))
    cfg = SimConfig(ScenarioConfig(n_drones=1, n_flights=1), ControlConfig(), 0.1, 10, 0.5, 1.0)
    traj = run(cfg, [DroneState(1, a, plan)])
    # 0.12 rad at 0.05 per step: arrival on the third step
    assert traj.times.tolist() == [0.0, 0.1, 0.2, 0.3]
    assert np.array_equal(traj.pos[-1], b)


def test_record_bookkeeping():
    traj = run(cfg_for(n=2, steps=500))
    assert len(traj) <= 1002
    steps = np.round(traj.times / 0.1)
    assert np.all(np.abs(traj.times - steps * 0.1) < 1e-9)
    assert traj.times.tolist() == [round(s * 0.1, 9) for s in steps]


def test_deterministic():
    cfg = cfg_for(ControlLaw.DETOUR, 0.6, n=4, steps=200)
    assert run(cfg).equals(run(cfg))


def test_stop_replay_oracle():
    traj = run(cfg_for(ControlLaw.STOP, 0.5, n=4, steps=500))
    assert audit_stop_yield(traj, 0.5) == 0


def test_detour_replay_oracle():
    traj = run(cfg_for(ControlLaw.DETOUR, 0.6, n=6, steps=300, scenario=ScenarioType.ZONED))
    assert audit_detour(traj, 0.6) == 0


def test_audits_detect_violations():
    # a free-flying simulation ignoring a huge spacing must trip both audits
    traj = run(cfg_for(ControlLaw.STOP, 1e-6, n=8, steps=100))
    assert audit_stop_yield(traj, 1.0) > 0
    assert audit_detour(traj, 1.0) > 0


def test_positions_stay_on_sphere():
    traj = run(cfg_for(ControlLaw.DETOUR, 0.7, n=8, steps=200, scenario=ScenarioType.STATIONS))
    assert np.max(np.abs(np.linalg.norm(traj.pos, axis=1) - 1.0)) <= 1e-9


@pytest.mark.parametrize("kwargs", [{"dt": 0}, {"n_steps": 0}, {"cruise_speed": -1}, {"radius": 0}])
def test_config_rejects(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)
