"""Energy-agent component models: renewables, storage, EV and tower loads.

Sign conventions: generation is reported as a positive power, loads as
positive consumption, and battery power is positive while charging.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import BatteryParams, CommTowerParams, PvParams, WindParams

CHARGING = "charging"
DISCHARGING = "discharging"
STANDBY = "standby"


def pv_irradiance(dni: float, sky_diffuse: float, ground_diffuse: float, cos_theta: float) -> float:
    """Total irradiance on the array surface, W/m^2.

    Direct normal radiation is projected with the incidence cosine and
    clipped at zero (sun behind the panel); both diffuse parts add as-is.
    """
    direct = max(0.0, cos_theta * dni)
    return direct + (sky_diffuse + ground_diffuse)


def pv_power(irradiance: float, params: PvParams) -> float:
    total = 0.0
    for a in params.arrays:
        total += a.area * a.f_act * a.efficiency * irradiance * a.eta_dcac
    return total


def turbine_power(wind_speed: float, params: WindParams) -> float:
    """Single-turbine output from the tabulated power curve.

    Zero below the first curve point (cut-in) and above the last (cut-out).
    """
    if not params.curve:
        return 0.0
    speeds = np.array([s for s, _ in params.curve])
    powers = np.array([p for _, p in params.curve])
    if wind_speed < speeds[0] or wind_speed > speeds[-1]:
        return 0.0
    return float(np.interp(wind_speed, speeds, powers))


def wind_power(wind_speed: float, params: WindParams) -> float:
    return params.count * turbine_power(wind_speed, params) * params.scale * params.eta_dcac


@dataclass(frozen=True)
class BatteryState:
    soc: float
    mode: str = STANDBY
    power: float = 0.0  # W, positive = charging


def battery_step(
    state: BatteryState,
    p_renewable: float,
    p_demand: float,
    params: BatteryParams,
    dt: float,
) -> BatteryState:
    """Advance the storage control sequence by one step of ``dt`` seconds.

    Renewables serve the demand first.  A surplus above the charge threshold
    charges the battery, a deficit above the discharge threshold discharges
    it, and otherwise it idles.  Power is limited by the rating and by the
    energy left before the battery is full or empty, so the state of charge
    never leaves [0, 1].
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    surplus = p_renewable - p_demand
    energy_wh = params.capacity_wh
    hours = dt / 3600.0

    if surplus > params.charge_threshold_w and state.soc < 1.0:
        headroom = (1.0 - state.soc) * energy_wh / hours
        power = min(surplus, params.max_charge_w, headroom)
        if power > 0.0:
            soc = 1.0 if power == headroom else state.soc + power * hours / energy_wh
            return BatteryState(min(soc, 1.0), CHARGING, power)
    elif -surplus > params.discharge_threshold_w and state.soc > 0.0:
        available = state.soc * energy_wh / hours
        power = min(-surplus, params.max_discharge_w, available)
        if power > 0.0:
            soc = 0.0 if power == available else state.soc - power * hours / energy_wh
            return BatteryState(max(soc, 0.0), DISCHARGING, -power)
    return BatteryState(state.soc, STANDBY, 0.0)


def ev_charging_power(n_char: float, p_char: float) -> float:
    """Aggregate EV charging load with an identical per-vehicle rate."""
    if n_char < 0:
        raise ValueError("n_char must be >= 0")
    return n_char * p_char


def comm_tower_power(throughput: float, params: CommTowerParams) -> float:
    """Electrical load of the block's communication towers, W.

    Every tower carries ``throughput`` packets/s; per tower the load is
    ``2 Q E_elec + Q eps_elec d^alpha`` (send/receive electronics plus the
    distance-dependent amplifier term).
    """
    if throughput < 0:
        raise ValueError("throughput must be >= 0")
    per_tower = 2.0 * throughput * params.e_elec + throughput * params.eps_elec * params.distance**params.alpha
    return params.count * per_tower
