"""Macroscopic road dynamics, block parking balance and EV charging count.

Flows are in vehicles/h, lengths in m, speeds in m/s and times in s.

A road keeps the cumulative count of vehicles that entered it, sampled at
the step boundaries.  Outflow is that cumulative inflow looked up one travel
time in the past (linear interpolation between samples), so the road acts
as a variable first-in-first-out delay: vehicles leave in the order they
entered and none are created or lost.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .scenario import RoadSpec

log = logging.getLogger(__name__)

SECONDS_PER_HOUR = 3600.0


class RoadConvergenceError(RuntimeError):
    pass


def road_velocity(v_ave: float, spec: RoadSpec) -> float:
    """Average speed for a flow of ``v_ave`` vehicles/h (empirical flow-speed curve)."""
    if v_ave < 0:
        raise ValueError("flow must be >= 0")
    load = v_ave / spec.capacity
    beta = spec.alpha2 + spec.alpha3 * load**3
    try:
        term = load**beta
    except OverflowError:
        # far past capacity: the road is at a standstill
        return 0.0
    return spec.alpha1 * spec.design_speed / (1.0 + term)


def equilibrium_speed(vehicles: float, spec: RoadSpec, rtol: float = 1e-12, maxiter: int = 100) -> tuple[float, float]:
    """Speed and flow consistent with ``vehicles`` on the road.

    Solves ``U = road_velocity(U * vehicles / L)`` (flow = speed x density).
    The residual ``U - road_velocity(U n / L)`` is strictly increasing in U
    and changes sign on ``(0, free-flow]``, so a bracketing solver always
    finds the unique root.
    """
    free = spec.free_flow_speed
    if vehicles <= 0.0:
        return free, 0.0
    k = SECONDS_PER_HOUR * vehicles / spec.length  # flow per unit speed

    def resid(u):
        return u - road_velocity(k * u, spec)

    if resid(free) == 0.0:
        return free, k * free
    lo = free * 1e-12
    try:
        u = brentq(resid, lo, free, xtol=free * 1e-14, rtol=rtol, maxiter=maxiter)
    except (RuntimeError, ValueError) as exc:
        raise RoadConvergenceError(
            f"road {spec.name!r}: speed/flow fixed point failed with {vehicles:g} vehicles: {exc}"
        ) from None
    return u, k * u


@dataclass(frozen=True, eq=False)
class RoadState:
    """State of one road at the start of a step.

    ``history_t``/``history_n`` hold the cumulative inflow (vehicles) at past
    step boundaries; only the part still reachable by a travel-time lookup
    is kept.  ``u_ave``, ``v_ave``, ``t_travel`` and ``q_out`` describe the
    most recent step.
    """

    history_t: np.ndarray
    history_n: np.ndarray
    cum_out: float
    vehicles_on_road: float
    u_ave: float
    v_ave: float
    t_travel: float
    q_out: float = 0.0

    @classmethod
    def empty(cls, spec: RoadSpec, t0: float) -> "RoadState":
        free = spec.free_flow_speed
        return cls(np.array([t0]), np.array([0.0]), 0.0, 0.0, free, 0.0, spec.length / free)

    def cumulative_inflow(self, t: float) -> float:
        return float(np.interp(t, self.history_t, self.history_n))


def road_step(
    state: RoadState,
    q_in: float,
    delay_factor: float,
    spec: RoadSpec,
    t: float,
    dt: float,
) -> RoadState:
    """Advance a road over ``[t, t + dt]`` with constant inflow ``q_in``.

    Speed and flow come from the vehicles currently on the road.  The
    travel time ``delay_factor * L / U`` sets how far back the cumulative
    inflow is read; vehicles whose entry is older than that leave during
    the step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if delay_factor < 1.0:
        raise ValueError("delay_factor must be >= 1")
    if q_in < 0:
        raise ValueError("inflow must be >= 0")

    n = state.vehicles_on_road
    u, v = equilibrium_speed(n, spec)
    t_travel = delay_factor * spec.length / u

    t_end = t + dt
    hist_t = np.append(state.history_t, t_end)
    hist_n = np.append(state.history_n, state.history_n[-1] + q_in * dt / SECONDS_PER_HOUR)

    lookup = t_end - t_travel
    reached = float(np.interp(lookup, hist_t, hist_n))
    cum_out = max(state.cum_out, reached)
    q_out = (cum_out - state.cum_out) * SECONDS_PER_HOUR / dt
    n_next = n + (q_in - q_out) * dt / SECONDS_PER_HOUR
    if n_next < 0.0:
        # rounding only: departures never exceed the cumulative inflow
        n_next = 0.0

    # drop samples no future lookup can need: anything before the sample
    # bracketing the current lookup time gives a count <= cum_out
    keep = max(int(np.searchsorted(hist_t, lookup, side="right")) - 1, 0)
    return RoadState(hist_t[keep:], hist_n[keep:], cum_out, n_next, u, v, t_travel, q_out)


@dataclass(frozen=True)
class BlockParking:
    n_parked: float
    n_charging: float = 0.0


def parking_step(parking: BlockParking, inflows, outflows, dt: float) -> BlockParking:
    """Integrate the block's vehicle balance over ``dt`` seconds.

    The count is continuous and floored at zero, with a warning, if the
    prescribed departures exceed the vehicles available.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    net = math.fsum(inflows) - math.fsum(outflows)
    n = parking.n_parked + net * dt / SECONDS_PER_HOUR
    if n < 0.0:
        log.warning("parked vehicle count went negative (%.6g); flooring at 0", n)
        n = 0.0
    charging = min(parking.n_charging, n)
    return BlockParking(n, charging)


def charging_count(n_parked: float, p_i: float) -> float:
    """Expected number of charging vehicles among ``n_parked``."""
    if not 0.0 <= p_i <= 1.0:
        raise ValueError("charging probability must lie in [0, 1]")
    if n_parked < 0:
        raise ValueError("n_parked must be >= 0")
    return p_i * n_parked
