import logging

import numpy as np
import pytest

from gridmesh.scenario import RoadSpec, TimeSeriesProfile
from gridmesh.transport import (
    BlockParking,
    RoadState,
    charging_count,
    equilibrium_speed,
    parking_step,
    road_step,
    road_velocity,
)
from oracles import cohort_road
from oracles import equilibrium_speed as oracle_speed

ROAD1 = dict(capacity=350.0, design_speed=30.0, alpha1=1.0, alpha2=1.88, alpha3=4.85)


def road(length=3000.0, **over):
    kw = dict(ROAD1)
    kw.update(over)
    return RoadSpec("r", "a", "b", length, inflow=TimeSeriesProfile.constant(0.0), **kw)


def drive(spec, q_in, t_end, dt=60.0, delay=1.0):
    """Step a road from empty; return per-step states."""
    s = RoadState.empty(spec, 0.0)
    out = []
    for t in np.arange(0.0, t_end, dt):
        s = road_step(s, q_in(t), delay, spec, float(t), dt)
        out.append((float(t), s))
    return out


def test_velocity_examples():
    spec = road()
    assert road_velocity(0, spec) == 30
    assert road_velocity(350, spec) == pytest.approx(15, rel=1e-9)
    assert road_velocity(700, spec) < 15


def test_equilibrium_speed_matches_oracle():
    spec = road()
    for n in (0.5, 3.0, 20.0, 80.0):
        u, v = equilibrium_speed(n, spec)
        assert u == pytest.approx(oracle_speed(n, 3000.0, 350.0, 30.0, 1.0, 1.88, 4.85), rel=1e-10)
        assert v == pytest.approx(3600 * u * n / 3000.0, rel=1e-12)
        assert u == pytest.approx(road_velocity(v, spec), rel=1e-10)


def test_quiescent_road():
    spec = road()
    for _, s in drive(spec, lambda t: 0.0, 3600):
        assert s.q_out == 0 and s.vehicles_on_road == 0
        assert s.u_ave == 30 and s.t_travel == 100.0
    s = road_step(RoadState.empty(spec, 0.0), 0.0, 1.3, spec, 0.0, 60.0)
    assert s.t_travel == pytest.approx(130.0)


def test_step_inflow_follows_cohort_oracle():
    spec = road()
    steps = drive(spec, lambda t: 100.0, 3 * 3600)
    times, cum, first = cohort_road(lambda t: 100.0, 3 * 3600, 3000.0, 350.0, 30.0, 1.0, 1.88, 4.85)

    free = 100.0
    for t, s in steps:
        if t + 60 < free:
            assert s.q_out == 0
    k = next(i for i, (_, s) in enumerate(steps) if s.q_out > 0)
    assert steps[k][0] <= first <= steps[k][0] + 60
    # cumulative departures agree to within one step of inflow
    for t, s in steps:
        ref = np.interp(t + 60, times, cum)
        assert abs(s.cum_out - ref) <= 100.0 * 60 / 3600
    assert steps[-1][1].q_out == pytest.approx(100.0, rel=1e-6)


def test_delay_factor_lags_first_arrival():
    # a trickle keeps the road effectively empty, so the speed stays at free flow
    spec = road()
    first_step = {}
    for delay in (1.0, 1.5):
        steps = drive(spec, lambda t: 2.0, 1800, delay=delay)
        k = next(i for i, (_, s) in enumerate(steps) if s.q_out > 0)
        _, _, first = cohort_road(lambda t: 2.0, 1800, 3000.0, 350.0, 30.0, 1.0, 1.88, 4.85, delay=delay)
        assert steps[k][0] <= first <= steps[k][0] + 60
        first_step[delay] = first
    assert first_step[1.5] / first_step[1.0] == pytest.approx(1.5, rel=0.01)


def test_travel_time_linear_in_delay_factor():
    spec = road()
    s = drive(spec, lambda t: 200.0, 900)[-1][1]
    a = road_step(s, 200.0, 1.0, spec, 900.0, 60.0)
    b = road_step(s, 200.0, 1.7, spec, 900.0, 60.0)
    assert b.t_travel == pytest.approx(1.7 * a.t_travel, rel=1e-12)


def test_long_horizon_outflow_matches_inflow():
    spec = road()

    def q(t):
        return 150.0 + 120.0 * np.sin(2 * np.pi * t / 7200.0) if t < 8 * 3600 else 0.0

    steps = drive(spec, q, 10 * 3600)
    q_in = sum(q(t) for t, _ in steps) * 60 / 3600
    q_out = sum(s.q_out for _, s in steps) * 60 / 3600
    assert abs(q_out - q_in) / q_in < 1e-3
    assert steps[-1][1].vehicles_on_road == pytest.approx(0.0, abs=1e-9)


def test_history_is_trimmed():
    spec = road()
    s = drive(spec, lambda t: 100.0, 6 * 3600)[-1][1]
    assert len(s.history_t) <= 4


def test_road_step_rejects_bad_inputs():
    spec = road()
    s = RoadState.empty(spec, 0.0)
    with pytest.raises(ValueError):
        road_step(s, 10.0, 0.9, spec, 0.0, 60.0)
    with pytest.raises(ValueError):
        road_step(s, -1.0, 1.0, spec, 0.0, 60.0)
    with pytest.raises(ValueError):
        road_step(s, 1.0, 1.0, spec, 0.0, 0.0)


def test_parking_examples(caplog):
    assert parking_step(BlockParking(800), [6, 4], [4], 3600).n_parked == pytest.approx(806)
    assert parking_step(BlockParking(800), [5, 5], [10], 3600).n_parked == 800
    with caplog.at_level(logging.WARNING):
        assert parking_step(BlockParking(1), [], [10], 3600).n_parked == 0
    assert "flooring" in caplog.text


def test_charging_count_examples():
    assert charging_count(800, 0.05) == pytest.approx(40)
    assert charging_count(800, 0) == 0
    assert charging_count(0, 0.5) == 0
    with pytest.raises(ValueError):
        charging_count(10, 1.5)
