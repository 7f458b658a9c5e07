"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line with the measured
numbers, then asserts.  Bundled runs are shared through ``bundled_run``.
"""

import dataclasses
import subprocess
import sys
import time
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from conftest import bundled_run
from gridmesh.cli import main
from gridmesh.energy import BatteryState, battery_step
from gridmesh.engine import compare, run
from gridmesh.indicators import lcf, pvlr, si_b, si_l
from gridmesh.powerflow import Bus, FeederNetwork, Line, solve_power_flow
from gridmesh.scenario import BatteryParams, bundled_scenario, load_scenario
from gridmesh.trace import TraceSet
from oracles import nodal_power_flow, two_bus_grid_power, two_bus_voltage

TESTS = Path(__file__).parent
UNIT_FILES = [
    "test_energy.py",
    "test_powerflow.py",
    "test_transport.py",
    "test_comms.py",
    "test_scenario.py",
    "test_indicators.py",
    "test_engine.py",
    "test_cli.py",
]
CASES = (("case1.scn", "e"), ("case2.scn", "et"), ("case3.scn", "etc"))


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail

    return emit


def window_masks(cfg, times):
    return [(times >= a) & (times < b) for a, b in cfg.peak_windows]


# 1 ---------------------------------------------------------------------------


def test_criterion_1_unit_examples(tmp_path, verdict):
    xml = tmp_path / "unit.xml"
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", f"--junitxml={xml}"]
        + [str(TESTS / f) for f in UNIT_FILES],
        capture_output=True,
        text=True,
        cwd=TESTS.parent,
    )
    cases = list(ET.parse(xml).getroot().iter("testcase"))
    failed = [c.get("name") for c in cases if c.find("failure") is not None or c.find("error") is not None]
    runtime = sum(float(c.get("time")) for c in cases)
    ok = proc.returncode == 0 and not failed and runtime < 5.0
    verdict(1, ok, f"{len(cases)} unit tests, {len(failed)} failed, test time {runtime:.2f} s (< 5 s)")


# 2 ---------------------------------------------------------------------------


def random_radial(rng, n):
    parents = [int(rng.integers(0, i)) for i in range(1, n)]
    z = rng.uniform(0.001, 0.05, n - 1) + 1j * rng.uniform(0.0, 0.05, n - 1)
    edges = [(p, i) for i, p in enumerate(parents, start=1)]
    loads = np.concatenate([[0.0], rng.uniform(0.0, 0.3, n - 1) + 1j * rng.uniform(-0.05, 0.1, n - 1)])
    net = FeederNetwork(
        tuple(Bus(f"b{i}") for i in range(n)),
        tuple(Line(f"l{i}", f"b{p}", f"b{i}", z[i - 1]) for p, i in edges),
        "b0",
        1.0,
    )
    return net, edges, z, loads


def test_criterion_2_power_flow_oracle(verdict):
    rng = np.random.default_rng(20240501)
    t0 = time.perf_counter()
    worst_v = worst_p = 0.0
    for k in range(100):
        n = 2 + k % 3
        net, edges, z, loads = random_radial(rng, n)
        sol = solve_power_flow(net, loads, 1.0)
        v_ref, p_ref = nodal_power_flow(n, edges, z, loads, 1.0)
        worst_v = max(worst_v, float(np.max(np.abs(sol.bus_voltages - v_ref))))
        worst_p = max(worst_p, abs(sol.grid_power - p_ref))
    # the scalar bisection route on real two-bus loads
    for _ in range(20):
        r, p = rng.uniform(0.001, 0.05), rng.uniform(0.0, 0.3)
        net = FeederNetwork((Bus("s"), Bus("b")), (Line("l", "s", "b", complex(r, 0.0)),), "s", 1.0)
        sol = solve_power_flow(net, {"b": p}, 1.0)
        worst_v = max(worst_v, abs(sol.voltage("b") - two_bus_voltage(p, r)))
        worst_p = max(worst_p, abs(sol.grid_power - two_bus_grid_power(p, r)))
    runtime = time.perf_counter() - t0
    ok = worst_v < 1e-8 and worst_p < 1e-8 and runtime < 10
    verdict(2, ok, f"max |dV| {worst_v:.2e} pu, max |dP| {worst_p:.2e} pu, {runtime:.2f} s")


# 3 ---------------------------------------------------------------------------


def test_criterion_3_conservation(verdict):
    t0 = time.perf_counter()
    # (a) grid draw = loads + losses at every step; 1 MW base for per unit
    worst_balance = 0.0
    for case, mode in CASES:
        cfg, tr = bundled_run(case, mode)
        s = lambda q: tr.data[q].sum(axis=1)  # noqa: E731
        loads = s("p_bui") + s("p_ev") + s("p_com") + s("p_gen") - s("p_pv") - s("p_win") + s("battery_power")
        gap = tr.series("grid_power", "community") - loads - s("line_loss")
        worst_balance = max(worst_balance, float(np.max(np.abs(gap))) / 1e6)

    # (b) the bundled community is closed: parked plus on-road stays fixed
    worst_vehicles = 0.0
    for case, mode in CASES[1:]:
        _, tr = bundled_run(case, mode)
        total = tr.data["n_parked"].sum(axis=1) + tr.data["vehicles"].sum(axis=1)
        worst_vehicles = max(worst_vehicles, float(np.max(np.abs(total - total[0])) / total[0]))

    # (c) state of charge under random step sequences
    rng = np.random.default_rng(7)
    soc_ok = True
    for _ in range(10_000):
        params = BatteryParams(
            rng.uniform(1, 1e4), rng.uniform(0, 5e3), rng.uniform(0, 5e3), rng.uniform(0, 500), rng.uniform(0, 500)
        )
        s = BatteryState(rng.uniform(0, 1))
        dt = float(rng.choice([1.0, 60.0, 900.0, 3600.0]))
        for ren, dem in rng.uniform(0, 1e4, (10, 2)):
            s = battery_step(s, ren, dem, params, dt)
            soc_ok &= 0.0 <= s.soc <= 1.0
    runtime = time.perf_counter() - t0
    ok = worst_balance < 1e-6 and worst_vehicles < 1e-6 and soc_ok and runtime < 30
    verdict(
        3,
        ok,
        f"balance {worst_balance:.2e} pu, vehicle drift {worst_vehicles:.2e}, SOC in [0,1]: {soc_ok}, {runtime:.2f} s",
    )


# 4 ---------------------------------------------------------------------------


def test_criterion_4_mode_degeneracy(verdict):
    cfg3 = load_scenario(bundled_scenario("case3.scn"))
    roads = tuple(dataclasses.replace(r, comm_link=dataclasses.replace(r.comm_link, kappa=0.0)) for r in cfg3.roads)
    no_loss = run(dataclasses.replace(cfg3, roads=roads), "etc")
    _, et = bundled_run("case2.scn", "et")
    same = no_loss.identical(et)
    verdict(4, same, f"case-3 with zero kappa bit-identical to case-2 E+T: {same}")


# 5 ---------------------------------------------------------------------------


def test_criterion_5_qualitative_reproduction(tmp_path, capsys, verdict):
    t0 = time.perf_counter()
    for name, case, mode in (("et", "case2.scn", "et"), ("etc", "case3.scn", "etc")):
        assert main(["run", "--scenario", case, "--mode", mode, "--out", str(tmp_path / name)]) == 0
    runtime = (time.perf_counter() - t0) / 2
    cfg, _ = bundled_run("case3.scn", "etc")
    et = TraceSet.read_csv(tmp_path / "et")
    etc = TraceSet.read_csv(tmp_path / "etc")
    times = et.times
    windows = window_masks(cfg, times)
    peak = np.any(windows, axis=0)
    notes = []

    # (a) velocity minimum sits on the flow maximum during each commute peak
    worst_offset = 0
    dips = 0
    for tr in (et, etc):
        for j in range(len(tr.columns["u_ave"])):
            for m in windows:
                idx = np.where(m)[0]
                u, v = tr.data["u_ave"][idx, j], tr.data["v_ave"][idx, j]
                if u.max() - u.min() < 0.01 * u.max():
                    continue  # no commute bump on this road in this window
                dips += 1
                worst_offset = max(worst_offset, abs(int(np.argmin(u)) - int(np.argmax(v))))
    a_ok = dips > 0 and worst_offset <= 2
    notes.append(f"(a) {dips} dips, worst offset {worst_offset} steps")

    # (b) packet loss only inside the commute windows, and present there
    gamma = etc.data["gamma"]
    b_ok = np.all(gamma[~peak] == 0) and gamma[peak].max() > 0
    # packet-loss peaks line up with flow peaks as well
    for j in range(gamma.shape[1]):
        for m in windows:
            idx = np.where(m)[0]
            if gamma[idx, j].max() > 0:
                off = abs(int(np.argmax(gamma[idx, j])) - int(np.argmax(etc.data["v_ave"][idx, j])))
                b_ok &= off <= 2
    notes.append(f"(b) max gamma off-peak {gamma[~peak].max():.1e}, at peak {gamma[peak].max():.3f}")

    # (c) velocities with packet loss never exceed the loss-free ones
    u_et, u_etc = et.data["u_ave"], etc.data["u_ave"]
    excess = float(np.max((u_etc - u_et)[peak] / u_et[peak]))
    strict = bool(np.any(u_etc[peak] < u_et[peak] * (1 - 1e-6)))
    off = float(np.max(np.abs(u_etc - u_et)[~peak] / u_et[~peak]))
    c_ok = excess <= 1e-12 and strict and off < 1e-3
    notes.append(f"(c) peak excess {excess:.1e}, strict drop {strict}, off-peak dev {off:.1e}")

    # deviations as reported by the compare command
    capsys.readouterr()
    reports = {}
    for q in ("u_ave", "grid_power"):
        assert main(["compare", str(tmp_path / "et"), str(tmp_path / "etc"), "--quantity", q]) == 0
        reports[q] = compare(et, etc, q)
    printed = capsys.readouterr().out
    u_rep, g_rep = reports["u_ave"], reports["grid_power"]
    g_col = g_rep.deviation[:, g_rep.columns.index("community")]
    g_peak_t = float(times[int(np.argmax(g_col))])
    in_window = any(a <= g_peak_t < b for a, b in cfg.peak_windows)
    u_in_window = any(a <= u_rep.peak_time < b for a, b in cfg.peak_windows)
    d_ok = u_rep.peak > 0 and g_col.max() > 0 and in_window and u_in_window and "peak deviation" in printed
    notes.append(
        f"velocity peak dev {100 * u_rep.peak:.2f}% ({u_rep.peak_element} at {u_rep.peak_time / 3600:.2f} h), "
        f"community grid-draw peak dev {100 * g_col.max():.3f}% at {g_peak_t / 3600:.2f} h"
    )
    notes.append(f"run time {runtime:.1f} s")
    ok = a_ok and b_ok and c_ok and d_ok and runtime < 60
    verdict(5, ok, "; ".join(notes))


# 6 ---------------------------------------------------------------------------


def test_criterion_6_indicators(verdict):
    checks = [
        abs(pvlr([2000, 1500, 1024.2]) - 48.79) <= 1e-9 * 48.79,
        pvlr([7.5] * 10) == 0,
        pvlr([100, 0]) == 100,
        abs(lcf([10e3], [100e3], dt=3600) - 10) <= 1e-9 * 10,
        lcf([0, 0], [5, 6]) == 0,
        lcf([5, 6], [5, 6]) == 100,
        si_b([[0.95, 1.0, 1.05]]) == 0,
        abs(si_b([[1.10], [1.00]]) - 0.025) <= 1e-9 * 0.025,
        abs(si_b([[0.90]]) - 0.05) <= 1e-9 * 0.05,
        si_l([[50, 80]], [100, 100]) == 0,
        abs(si_l([[120]], [100]) - 0.2) <= 1e-9 * 0.2,
        abs(si_l([[100, 130]], [100, 100]) - 0.15) <= 1e-9 * 0.15,
    ]
    rng = np.random.default_rng(3)
    clean_v = rng.uniform(0.96, 1.04, (200, 8))
    clean_p = rng.uniform(-0.9, 0.9, (200, 5)) * 1e5
    clean = si_b(clean_v) == 0 and si_l(clean_p, [1e5] * 5) == 0
    series = rng.uniform(1e5, 5e6, 500)
    base = pvlr(series)
    scale_ok = all(abs(pvlr(k * series) - base) <= 1e-9 * base for k in rng.uniform(1e-3, 1e3, 100))
    ok = all(checks) and clean and scale_ok
    verdict(6, ok, f"{sum(checks)}/{len(checks)} examples, clean trace zero: {clean}, scale invariance: {scale_ok}")


# 7 ---------------------------------------------------------------------------


def totals(tr, dt):
    energy = float(tr.series("grid_power", "community").sum() * dt)
    delivered = float(tr.data["q_out"].sum() * dt / 3600) if "q_out" in tr.data else None
    return energy, delivered


def test_criterion_7_engine_robustness(verdict):
    worst_energy = worst_vehicles = 0.0
    worst_iters, worst_resid = 0, 0.0
    deterministic = True
    for case, mode in CASES:
        cfg, coarse = bundled_run(case, mode)
        fine_cfg, fine = bundled_run(case, mode, cfg.dt / 2)
        e1, v1 = totals(coarse, cfg.dt)
        e2, v2 = totals(fine, fine_cfg.dt)
        worst_energy = max(worst_energy, abs(e2 - e1) / abs(e1))
        if v1 is not None:
            worst_vehicles = max(worst_vehicles, abs(v2 - v1) / v1)
        deterministic &= run(cfg, mode).identical(coarse)
        for tr in (coarse, fine):
            worst_iters = max(worst_iters, int(tr.data["coupling_iterations"].max()))
            worst_resid = max(worst_resid, float(tr.data["coupling_residual"].max()))
    ok = worst_energy < 0.01 and worst_vehicles < 0.01 and deterministic and worst_iters <= 50 and worst_resid < 1e-8
    verdict(
        7,
        ok,
        f"dt halving: energy {100 * worst_energy:.4f}%, vehicles {100 * worst_vehicles:.2e}%; "
        f"bit-identical reruns: {deterministic}; max iterations {worst_iters}, max residual {worst_resid:.1e}",
    )
