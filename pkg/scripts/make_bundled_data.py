"""Regenerate the bundled scenarios ``case1.scn``, ``case2.scn`` and ``case3.scn``.

Every time series written here is SYNTHETIC: smooth stand-ins shaped like a
winter day in a mild coastal climate, residential/commercial load curves and
a two-peak commute.  Only the device sizes, the road parameters and the
communication coefficients of the three-block community are fixed values.

    python3 scripts/make_bundled_data.py [--out src/gridmesh/data]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
import yaml

H = 3600.0
T = np.arange(0.0, 86400.0 + 1.0, 300.0)  # 5 min samples
HOURS = T / H

BLOCKS = ("res1", "res2", "com")
PV_AREA = {"res1": 20000.0, "res2": 30000.0, "com": 50000.0}
BATTERY_KWH = {"res1": 4000.0, "res2": 5000.0, "com": 6000.0}
INITIAL_EV = {"res1": 800.0, "res2": 800.0, "com": 200.0}
EV_CHARGE_W = 7000.0
C_PKT = 25.0  # routing packets/s per vehicle on a road

# name, from, to, length m, capacity veh/h, design speed m/s, alpha1..3, kappa, C_c
ROADS = (
    ("road1", "res1", "res2", 4000.0, 350.0, 30.0, 1.0, 1.88, 4.85, 0.03, 80.0),
    ("road2", "res2", "res1", 4000.0, 350.0, 30.0, 1.0, 1.88, 4.85, 0.03, 80.0),
    ("road3", "res1", "com", 8000.0, 1100.0, 60.0, 1.0, 1.88, 7.0, 0.02, 300.0),
    ("road4", "com", "res1", 8000.0, 1100.0, 60.0, 1.0, 1.88, 7.0, 0.02, 300.0),
    ("road5", "res2", "com", 10000.0, 800.0, 56.0, 1.4, 1.88, 6.97, 0.035, 350.0),
    ("road6", "com", "res2", 10000.0, 800.0, 56.0, 1.4, 1.88, 6.97, 0.035, 350.0),
)

PEAK_WINDOWS = ((6 * H, 10 * H), (16 * H, 20 * H))

WIND_CURVE = (
    (3.0, 0.0), (4.0, 50e3), (5.0, 110e3), (6.0, 200e3), (7.0, 320e3), (8.0, 470e3),
    (9.0, 640e3), (10.0, 800e3), (11.0, 920e3), (12.0, 1e6), (25.0, 1e6),
)


def bump(center_h, width_h, height):
    return height * np.exp(-0.5 * ((HOURS - center_h) / width_h) ** 2)


def weather():
    sunrise, sunset = 7.4, 17.1
    s = np.clip(np.sin(np.pi * (HOURS - sunrise) / (sunset - sunrise)), 0.0, None)
    s[(HOURS < sunrise) | (HOURS > sunset)] = 0.0
    return {
        "dni": 420.0 * np.sqrt(s),
        "sky_diffuse": 70.0 * s,
        "ground_diffuse": 15.0 * s,
        "cos_theta": 0.1 + 0.55 * s,
        "wind_speed": 4.5 + 1.5 * np.sin(2 * np.pi * (HOURS - 9.0) / 24.0) + bump(15.0, 2.0, 1.5),
    }


def building_load(block):
    if block == "com":
        # offices, malls and restaurants: flat night, long working-day plateau
        day = 1.0 / (1.0 + np.exp(-(HOURS - 7.0) * 2.0)) - 1.0 / (1.0 + np.exp(-(HOURS - 19.0) * 2.0))
        return 2.5e6 + 4.0e6 * day + bump(12.5, 1.0, 0.6e6) + bump(18.5, 1.2, 0.5e6)
    size = 1.0 if block == "res1" else 1.2
    base = 0.75e6 + bump(7.5, 1.0, 0.45e6) + bump(19.0, 2.0, 1.1e6) - bump(13.0, 2.0, 0.15e6)
    return size * base


def charge_probability(block):
    if block == "com":
        return 0.01 + bump(12.0, 3.0, 0.09)
    # evening charging after the commute, peaking in the late evening
    return 0.02 + bump(22.3, 2.2, 0.12) + bump(0.0, 2.0, 0.05) + bump(24.0, 2.0, 0.05)


def road_inflow():
    flows = {}
    flows["road1"] = 5.0 + bump(9.0, 1.0, 35.0) + bump(17.0, 1.5, 25.0)
    flows["road2"] = 5.0 + bump(9.0, 1.0, 25.0) + bump(17.0, 1.5, 35.0)
    flows["road3"] = 5.0 + bump(8.0, 0.5, 350.0) + bump(13.0, 1.0, 30.0)
    flows["road4"] = 5.0 + bump(18.0, 0.5, 350.0) + bump(13.0, 1.0, 30.0)
    flows["road5"] = 5.0 + bump(8.0, 0.5, 370.0) + bump(13.0, 1.0, 30.0)
    flows["road6"] = 5.0 + bump(18.0, 0.5, 370.0) + bump(13.0, 1.0, 30.0)
    return flows


def prescribed_series(flows):
    """Parking-based EV load and tower throughput assuming instant travel.

    These feed the energy-only case, where traffic is an input rather than
    a simulated system.
    """
    dt = np.diff(T, prepend=T[0])
    out = {}
    for b in BLOCKS:
        net = np.zeros_like(T)
        q_tower = np.zeros_like(T)
        for name, frm, to, length, _, us, a1, *_ in ROADS:
            if to == b:
                net += flows[name]
            if frm == b:
                net -= flows[name]
                q_tower += C_PKT * flows[name] * (length / (a1 * us)) / H
        # trapezoidal integration of the parking balance
        rate = net / H
        n = INITIAL_EV[b] + np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * dt[1:])])
        n = np.maximum(n, 0.0)
        out[b] = (charge_probability(b) * n * EV_CHARGE_W, q_tower)
    return out


def feeder(block):
    """IEEE 16-node shape (three feeders off one substation) with synthetic impedances."""
    buses = [f"n{i}" for i in range(1, 17)]
    topo = [
        ("n1", "n2"), ("n1", "n3"), ("n1", "n4"), ("n4", "n5"), ("n4", "n6"), ("n6", "n7"),
        ("n2", "n8"), ("n8", "n9"), ("n8", "n10"), ("n9", "n11"), ("n9", "n12"),
        ("n3", "n13"), ("n13", "n14"), ("n13", "n15"), ("n15", "n16"),
    ]
    rng = np.random.default_rng({"res1": 11, "res2": 12, "com": 13}[block])
    lines = []
    for k, (a, b) in enumerate(topo, start=1):
        r = round(float(rng.uniform(0.08, 0.25)), 4)
        lines.append({"name": f"l{k}", "from": a, "to": b, "r": r, "x": round(r * 1.6, 4),
                      "p_max": 4.0e6 if a == "n1" else 2.0e6})
    attach = {
        "n5": {"building": 0.15}, "n7": {"building": 0.15}, "n10": {"building": 0.15},
        "n11": {"building": 0.15, "ev": 0.5}, "n12": {"building": 0.1, "ev": 0.5},
        "n14": {"building": 0.15, "wind": 1.0}, "n16": {"building": 0.15, "comm": 1.0},
        "n6": {"pv": 0.5}, "n15": {"pv": 0.5}, "n13": {"battery": 1.0},
    }
    if block == "com":
        for bus in ("n11", "n12"):
            attach[bus]["ev"] = 0.5
    return {
        "root": "n1",
        "buses": [{"id": b, "attach": attach[b]} if b in attach else {"id": b} for b in buses],
        "lines": lines,
    }


def write_series(directory: Path, name: str, values: np.ndarray) -> str:
    rows = ["time_s,value"] + [f"{t!r},{float(v)!r}" for t, v in zip(T.tolist(), np.round(values, 6))]
    (directory / f"{name}.csv").write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")
    return f"series/{name}.csv"


def scenario(name: str, refs: dict, with_prescribed: bool) -> dict:
    blocks = []
    for b in BLOCKS:
        d = {
            "name": b,
            "pv": {"area": PV_AREA[b], "f_act": 0.9, "efficiency": 0.15, "eta_dcac": 0.96},
            "wind": {"count": 1, "curve": [list(p) for p in WIND_CURVE], "scale": 1.0, "eta_dcac": 0.95},
            "battery": {
                "capacity_wh": BATTERY_KWH[b] * 1e3,
                "max_power": 500e3,
                "charge_threshold_w": 0.0,
                "discharge_threshold_w": 0.0,
                "initial_soc": 0.1,
            },
            "feeder": feeder(b),
            "initial_ev_count": INITIAL_EV[b],
            "charge_probability": refs[f"{b}_charge_probability"],
            "ev_charge_power": EV_CHARGE_W,
            "building_load": refs[f"{b}_building_load"],
            "comm": {"count": 1, "e_elec": 1.0, "eps_elec": 1e-4, "distance": 1000.0, "alpha": 2.0},
        }
        if with_prescribed:
            d["prescribed_ev_power"] = refs[f"{b}_prescribed_ev_power"]
            d["prescribed_throughput"] = refs[f"{b}_prescribed_throughput"]
        blocks.append(d)
    roads = [
        {
            "name": n, "from": f, "to": t, "length": length, "capacity": cap, "design_speed": us,
            "alpha1": a1, "alpha2": a2, "alpha3": a3, "inflow": refs[f"{n}_inflow"],
            "comm_link": {"kappa": kappa, "c_c": cc, "c_pkt": C_PKT},
        }
        for n, f, t, length, cap, us, a1, a2, a3, kappa, cc in ROADS
    ]
    return {
        "name": name,
        "simulation": {"start": 0.0, "end": 86400.0, "dt": 60.0, "coupling_tolerance": 1e-8, "coupling_max_iters": 50},
        "grid": {"bus": "grid", "voltage": 12470.0},
        "signals": {"lmp": 0.0, "sig_e": 0.0},
        "peak_windows": [list(w) for w in PEAK_WINDOWS],
        "weather": {k: refs[f"weather_{k}"] for k in weather()},
        "community_lines": [
            {"name": f"feed_{b}", "from": "grid", "to": b, "r": 0.05, "x": 0.08, "p_max": 12e6} for b in BLOCKS
        ],
        "blocks": blocks,
        "roads": roads,
    }


HEADER = {
    "case1": "# Three-block community, energy system with fixed traffic and communication inputs (run with --mode e).\n",
    "case2": "# Three-block community, energy and transportation coupled (run with --mode et).\n",
    "case3": "# Three-block community, energy, transportation and communication coupled (run with --mode etc).\n",
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "src" / "gridmesh" / "data")
    args = ap.parse_args(argv)
    series_dir = args.out / "series"
    series_dir.mkdir(parents=True, exist_ok=True)

    refs = {}
    for k, v in weather().items():
        refs[f"weather_{k}"] = write_series(series_dir, f"weather_{k}", v)
    flows = road_inflow()
    for n, v in flows.items():
        refs[f"{n}_inflow"] = write_series(series_dir, f"{n}_inflow", v)
    for b in BLOCKS:
        refs[f"{b}_building_load"] = write_series(series_dir, f"{b}_building_load", building_load(b))
        refs[f"{b}_charge_probability"] = write_series(series_dir, f"{b}_charge_probability", charge_probability(b))
    for b, (p_ev, q) in prescribed_series(flows).items():
        refs[f"{b}_prescribed_ev_power"] = write_series(series_dir, f"{b}_prescribed_ev_power", p_ev)
        refs[f"{b}_prescribed_throughput"] = write_series(series_dir, f"{b}_prescribed_throughput", q)

    for case, prescribed in (("case1", True), ("case2", False), ("case3", False)):
        text = (
            HEADER[case]
            + "# All time series are synthetic stand-ins (see scripts/make_bundled_data.py).\n"
            + yaml.safe_dump(scenario(case, refs, prescribed), sort_keys=False, default_flow_style=None, width=120)
        )
        (args.out / f"{case}.scn").write_text(text, encoding="utf-8", newline="\n")
        print(f"wrote {args.out / (case + '.scn')}")


if __name__ == "__main__":
    main()
