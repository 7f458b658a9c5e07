"""Independent reference computations used to check the production code.

None of these import the solver being checked.  They use different
formulations on purpose: bisection on the scalar two-bus equation, a nodal
admittance Newton solve for small meshes of buses, and a second-by-second
cohort simulation of a road.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq, root


def two_bus_voltage(p_load: float, r: float, v0: float = 1.0) -> float:
    """Receiving-end voltage of a purely resistive two-bus line.

    ``V (v0 - V) / r = p_load``; the high-voltage root lies in
    ``[v0 / 2, v0]`` and is found by bisection.
    """

    def f(v):
        return v * (v0 - v) / r - p_load

    lo, hi = 0.5 * v0, v0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        # f decreases on [v0/2, v0]: f(lo) >= 0 >= f(hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def two_bus_grid_power(p_load: float, r: float, v0: float = 1.0) -> float:
    v = two_bus_voltage(p_load, r, v0)
    return v0 * (v0 - v) / r


def nodal_power_flow(n_bus: int, edges, z, s_load, v0: complex = 1.0):
    """Solve constant-power loads with the bus admittance matrix.

    ``edges`` are ``(i, j)`` bus pairs with series impedance ``z[k]``; bus 0
    is the slack.  Returns ``(V, grid_power)``.  Unknowns are the real and
    imaginary parts of the non-slack voltages; the residual is the complex
    power balance ``V_i conj((Y V)_i) + S_i = 0`` at each load bus.
    """
    y = np.zeros((n_bus, n_bus), dtype=complex)
    for (i, j), zk in zip(edges, z):
        yk = 1.0 / zk
        y[i, i] += yk
        y[j, j] += yk
        y[i, j] -= yk
        y[j, i] -= yk
    s = np.asarray(s_load, dtype=complex)

    def unpack(x):
        v = np.empty(n_bus, dtype=complex)
        v[0] = v0
        v[1:] = x[: n_bus - 1] + 1j * x[n_bus - 1:]
        return v

    def resid(x):
        v = unpack(x)
        mis = v * np.conj(y @ v) + s
        return np.concatenate([mis[1:].real, mis[1:].imag])

    x0 = np.concatenate([np.full(n_bus - 1, complex(v0).real), np.full(n_bus - 1, complex(v0).imag)])
    sol = root(resid, x0, method="hybr", options={"xtol": 1e-14})
    # hybr may stop at its xtol floor; the power mismatch is what matters
    if np.max(np.abs(resid(sol.x))) > 1e-12:
        raise RuntimeError(f"nodal oracle failed: {sol.message}")
    v = unpack(sol.x)
    grid = float(np.real(v[0] * np.conj((y @ v)[0]))) + float(np.real(s[0]))
    return v, grid


def bpr_speed(v_ave, cap, us, a1, a2, a3):
    x = v_ave / cap
    if x == 0:
        return a1 * us
    log_term = (a2 + a3 * x**3) * math.log(x)
    return 0.0 if log_term > 700 else a1 * us / (1.0 + math.exp(log_term))


def equilibrium_speed(n, length, cap, us, a1, a2, a3):
    """Speed ``U`` with ``U = bpr_speed(3600 U n / L)``, by Brent's method."""
    if n <= 0:
        return a1 * us
    k = 3600.0 * n / length
    return brentq(lambda u: u - bpr_speed(k * u, cap, us, a1, a2, a3), 1e-12, a1 * us, xtol=1e-14, rtol=1e-14)


def cohort_road(inflow, t_end, length, cap, us, a1, a2, a3, delay=1.0, h=1.0):
    """Road simulated as FIFO cohorts on a fine clock.

    A cohort of ``inflow(t) * h / 3600`` vehicles enters every ``h`` seconds
    and leaves once its age reaches the current travel time
    ``delay * L / U(n)``.  Returns ``(times, cumulative_out, first_exit)``.
    """
    entries = []  # (entry time, size)
    times = np.arange(0.0, t_end + h / 2, h)
    cum_out = np.zeros_like(times)
    out = 0.0
    on_road = 0.0
    head = 0
    first = None
    for k, t in enumerate(times):
        u = equilibrium_speed(on_road, length, cap, us, a1, a2, a3)
        tau = delay * length / u
        while head < len(entries) and t - entries[head][0] >= tau - 1e-9:
            out += entries[head][1]
            on_road -= entries[head][1]
            if first is None and entries[head][1] > 0:
                first = t
            head += 1
        cum_out[k] = out
        size = inflow(t) * h / 3600.0
        entries.append((t, size))
        on_road += size
    return times, cum_out, first


def free_flow_time(length, us, a1):
    return length / (a1 * us)


def isclose(a, b, rel=1e-9, abs_=0.0):
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)
