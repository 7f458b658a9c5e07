import copy
import functools
import sys
from pathlib import Path

import pytest
import yaml

sys.path.insert(0, str(Path(__file__).parent))

from gridmesh import bundled_scenario, load_scenario, parse_scenario, run  # noqa: E402


def block_dict(name="a", **over):
    d = {
        "name": name,
        "pv": {"area": 1000.0, "f_act": 1.0, "efficiency": 0.2, "eta_dcac": 0.95},
        "wind": {"count": 1, "curve": [[3, 0], [12, 100000], [25, 100000]], "scale": 1.0, "eta_dcac": 0.9},
        "battery": {"capacity_wh": 200000.0, "max_power": 50000.0, "initial_soc": 0.5},
        "feeder": {
            "root": "b1",
            "buses": [
                {"id": "b1"},
                {"id": "b2", "attach": {"building": 0.5, "ev": 1.0, "pv": 1.0}},
                {"id": "b3", "attach": {"building": 0.5, "comm": 1.0, "wind": 1.0, "battery": 1.0}},
            ],
            "lines": [
                {"name": "l1", "from": "b1", "to": "b2", "r": 0.4, "x": 0.2, "p_max": 200000.0},
                {"name": "l2", "from": "b2", "to": "b3", "r": 0.3, "x": 0.1, "p_max": 150000.0},
            ],
        },
        "initial_ev_count": 100.0,
        "charge_probability": 0.1,
        "ev_charge_power": 7000.0,
        "building_load": {"samples": [[0, 80000.0], [3600, 120000.0]]},
        "comm": {"count": 1, "e_elec": 1.0, "eps_elec": 1e-4, "distance": 100.0, "alpha": 2.0},
    }
    d.update(over)
    return d


def road_dict(name="r1", frm="a", to="a", **over):
    d = {
        "name": name,
        "from": frm,
        "to": to,
        "length": 3000.0,
        "capacity": 350.0,
        "design_speed": 30.0,
        "alpha1": 1.0,
        "alpha2": 1.88,
        "alpha3": 4.85,
        "inflow": {"samples": [[0, 50.0], [1800, 300.0], [3600, 50.0]]},
        "comm_link": {"kappa": 0.03, "c_c": 40.0, "c_pkt": 10.0},
    }
    d.update(over)
    return d


def scenario_dict(blocks=None, roads=None, **sim):
    blocks = blocks if blocks is not None else [block_dict()]
    roads = roads if roads is not None else [road_dict()]
    simulation = {"start": 0.0, "end": 3600.0, "dt": 60.0}
    simulation.update(sim)
    return {
        "name": "mini",
        "simulation": simulation,
        "grid": {"bus": "grid", "voltage": 12470.0},
        "weather": {
            "dni": {"samples": [[0, 300.0], [3600, 500.0]]},
            "sky_diffuse": 60.0,
            "ground_diffuse": 10.0,
            "cos_theta": 0.7,
            "wind_speed": {"samples": [[0, 6.0], [3600, 9.0]]},
        },
        "community_lines": [
            {"name": f"feed_{b['name']}", "from": "grid", "to": b["name"], "r": 0.05, "x": 0.05, "p_max": 1e6}
            for b in blocks
        ],
        "blocks": blocks,
        "roads": roads,
    }


def build(d, dt=None):
    return parse_scenario(yaml.safe_dump(copy.deepcopy(d)), dt=dt)


@functools.lru_cache(maxsize=None)
def bundled_run(case: str, mode: str, dt: float | None = None):
    cfg = load_scenario(bundled_scenario(case), dt=dt)
    return cfg, run(cfg, mode)


@pytest.fixture
def mini():
    return build(scenario_dict())
