"""Performance indicators computed from a finished trace.

Voltage band is 0.95-1.05 pu.  Every simulation step counts as one event
for the violation indicators, and line violations are measured in per-unit
of the line rating so the index does not depend on the system size.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .trace import TraceSet

V_LOW = 0.95
V_HIGH = 1.05


class IndicatorError(ValueError):
    pass


def pvlr(grid_power) -> float:
    """Peak-valley load ratio of grid draw, in percent.

    For a series that only exports (all values <= 0) the peak and valley
    are taken on magnitudes, so the result stays in [0, 100].
    """
    p = np.asarray(grid_power, dtype=float).ravel()
    if p.size == 0:
        raise IndicatorError("pvlr needs a nonempty series")
    if np.all(p <= 0):
        p = -p
    p_max, p_min = float(p.max()), float(p.min())
    if p_max == 0:
        raise IndicatorError("pvlr is undefined when the peak power is 0")
    return 100.0 * (p_max - p_min) / p_max


def lcf(renewable, demand, dt=None) -> float:
    """Share of demand energy covered by renewables, in percent.

    Both series are integrated with the same step (rectangle rule); ``dt``
    may be a scalar or per-sample array and defaults to 1.
    """
    r = np.asarray(renewable, dtype=float).ravel()
    d = np.asarray(demand, dtype=float).ravel()
    if r.shape != d.shape:
        raise IndicatorError("renewable and demand series must share a grid")
    w = np.ones_like(d) if dt is None else np.broadcast_to(np.asarray(dt, dtype=float), d.shape)
    e_dem = float(np.dot(d, w))
    if not e_dem > 0:
        raise IndicatorError("lcf is undefined for zero total demand")
    return 100.0 * float(np.dot(r, w)) / e_dem


def voltage_violation(v_pu) -> np.ndarray:
    v = np.asarray(v_pu, dtype=float)
    return np.where(v > V_HIGH, v - V_HIGH, np.where(v < V_LOW, V_LOW - v, 0.0))


def si_b(bus_voltages) -> float:
    """Mean band violation over every (bus, step); input is steps x buses in pu."""
    v = np.asarray(bus_voltages, dtype=float)
    if v.size == 0:
        raise IndicatorError("si_b needs at least one bus and one step")
    return float(voltage_violation(v).mean())


def si_l(line_powers, limits) -> float:
    """Mean per-unit overload over every (line, step).

    ``line_powers`` is steps x lines (W); the magnitude of the flow is
    compared with each line's rating, so reverse flows count too.
    """
    p = np.atleast_2d(np.asarray(line_powers, dtype=float))
    lim = np.asarray(limits, dtype=float).ravel()
    if p.size == 0 or lim.size == 0:
        raise IndicatorError("si_l needs at least one line and one step")
    if p.shape[1] != lim.size:
        raise IndicatorError("one limit per line is required")
    if np.any(lim <= 0):
        raise IndicatorError("line limits must be positive")
    over = np.maximum(np.abs(p) - lim, 0.0) / lim
    return float(over.mean())


def _peak(times, x) -> tuple[float, float | None]:
    if len(x) == 0:
        return 0.0, None
    k = int(np.argmax(x))
    return float(x[k]), float(times[k])


def congestion(trace: TraceSet) -> tuple[dict, dict]:
    """Per-road travel-time and packet-loss summaries.

    Returns ``(road, transmission)``; each maps road name to mean, peak and
    peak timestamp.  Traces without roads give empty mappings.
    """
    road, trans = {}, {}
    if "t_travel" in trace.data:
        for j, name in enumerate(trace.columns["t_travel"]):
            col = trace.data["t_travel"][:, j]
            peak, when = _peak(trace.times, col)
            road[name] = {"mean_t_travel": float(col.mean()) if len(col) else 0.0,
                          "peak_t_travel": peak, "peak_time": when}
    if "gamma" in trace.data:
        for j, name in enumerate(trace.columns["gamma"]):
            col = trace.data["gamma"][:, j]
            peak, when = _peak(trace.times, col)
            trans[name] = {"mean_gamma": float(col.mean()) if len(col) else 0.0,
                           "peak_gamma": peak, "peak_time": when}
    return road, trans


@dataclass
class IndicatorReport:
    """Indicators per block plus a ``community`` aggregate.

    Entries are ``None`` where an indicator is undefined (for example no
    rated lines in a block, or zero demand).
    """

    pvlr: dict = field(default_factory=dict)
    lcf: dict = field(default_factory=dict)
    si_b: dict = field(default_factory=dict)
    si_l: dict = field(default_factory=dict)
    road_congestion: dict = field(default_factory=dict)
    transmission_congestion: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        keys = list(self.pvlr)
        rows = [("", "pvlr %", "lcf %", "si_b", "si_l")]
        for k in keys:
            rows.append((k,) + tuple(_fmt(d.get(k)) for d in (self.pvlr, self.lcf, self.si_b, self.si_l)))
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        out = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
        for name, c in self.road_congestion.items():
            g = self.transmission_congestion.get(name)
            line = f"{name}: t_travel mean {c['mean_t_travel']:.1f} s, peak {c['peak_t_travel']:.1f} s"
            if g is not None:
                line += f"; gamma mean {g['mean_gamma']:.4g}, peak {g['peak_gamma']:.4g}"
            out.append(line)
        return "\n".join(out) + "\n"


def _fmt(x) -> str:
    return "-" if x is None else f"{x:.6g}"


def _safe(fn, *args):
    try:
        v = fn(*args)
    except IndicatorError:
        return None
    return v if math.isfinite(v) else None


def evaluate(trace: TraceSet, config) -> IndicatorReport:
    """Build the full report for a trace produced from ``config``."""
    rep = IndicatorReport()
    if len(trace) == 0:
        return rep
    blocks = [b.name for b in config.blocks]
    dt = config.dt

    gp = trace.data["grid_power"]
    for j, name in enumerate(trace.columns["grid_power"]):
        rep.pvlr[name] = _safe(pvlr, gp[:, j])

    def block_sum(qs):
        return sum(trace.data[q] for q in qs)

    ren = block_sum(("p_pv", "p_win"))
    dem = block_sum(("p_bui", "p_ev", "p_com", "p_gen"))
    rep.lcf["community"] = _safe(lcf, ren.sum(axis=1), dem.sum(axis=1), dt)
    for j, name in enumerate(blocks):
        rep.lcf[name] = _safe(lcf, ren[:, j], dem[:, j], dt)

    bus_cols = trace.columns["bus_voltage"]
    v = trace.data["bus_voltage"]
    rep.si_b["community"] = _safe(si_b, v)
    for name in blocks:
        idx = [k for k, c in enumerate(bus_cols) if c.startswith(name + ".")]
        rep.si_b[name] = _safe(si_b, v[:, idx]) if idx else None

    limits = {ln.name: ln.p_max for ln in config.community_lines}
    for b in config.blocks:
        for ln in b.feeder.lines:
            limits[f"{b.name}.{ln.name}"] = ln.p_max
    line_cols = trace.columns["line_power"]
    p = trace.data["line_power"]

    def si_l_for(cols):
        idx = [k for k, c in enumerate(line_cols) if c in cols and math.isfinite(limits.get(c, math.inf))]
        if not idx:
            return None
        return _safe(si_l, p[:, idx], [limits[line_cols[k]] for k in idx])

    rep.si_l["community"] = si_l_for(set(line_cols))
    for name in blocks:
        rep.si_l[name] = si_l_for({c for c in line_cols if c.startswith(name + ".")})

    rep.road_congestion, rep.transmission_congestion = congestion(trace)
    return rep
