"""Balanced single-phase power flow for radial feeders.

The solver is a backward-forward sweep.  Bus ordering and the subtree
incidence matrix are computed once when the network is built, so each sweep
is two small matrix-vector products:

* backward: branch currents ``I = D @ I_load`` (``D[l, b] = 1`` when bus
  ``b`` lies downstream of line ``l``);
* forward: ``V = V_slack - D.T @ (Z * I)``, i.e. every line enforces
  ``V_from - V_to = Z I``.

Loads are constant power and are re-evaluated at the latest voltages.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

BUS_KINDS = ("building", "ev", "general", "comm", "none")


class PowerFlowError(RuntimeError):
    pass


class NetworkTopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Bus:
    id: str
    kind: str = "none"


@dataclass(frozen=True)
class Line:
    name: str
    from_bus: str
    to_bus: str
    impedance: complex  # ohm
    p_max: float = float("inf")  # W


@dataclass(frozen=True, eq=False)
class FeederNetwork:
    """Radial network rooted at ``slack_bus``.

    Lines may be listed in either direction; they are oriented away from the
    slack bus on construction.  Non-radial inputs raise
    :class:`NetworkTopologyError`.
    """

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    slack_bus: str
    nominal_voltage: float = 1.0

    bus_ids: tuple[str, ...] = field(init=False)
    index: dict = field(init=False)
    line_from: np.ndarray = field(init=False)
    line_to: np.ndarray = field(init=False)
    z: np.ndarray = field(init=False)
    subtree: np.ndarray = field(init=False)

    def __post_init__(self):
        buses = tuple(self.buses)
        lines = tuple(self.lines)
        object.__setattr__(self, "buses", buses)
        object.__setattr__(self, "lines", lines)
        ids = [b.id for b in buses]
        if len(set(ids)) != len(ids):
            raise NetworkTopologyError("duplicate bus ids")
        if self.slack_bus not in ids:
            raise NetworkTopologyError(f"slack bus {self.slack_bus!r} is not a bus")
        if len(lines) != len(buses) - 1:
            raise NetworkTopologyError(
                f"radial network with {len(buses)} buses needs {len(buses) - 1} lines, got {len(lines)}"
            )
        index = {b: i for i, b in enumerate(ids)}
        adj: dict[str, list[tuple[int, str]]] = {b: [] for b in ids}
        for k, ln in enumerate(lines):
            if ln.from_bus not in index or ln.to_bus not in index:
                raise NetworkTopologyError(f"line {ln.name!r} references an unknown bus")
            if ln.impedance.real < 0:
                raise NetworkTopologyError(f"line {ln.name!r} has negative resistance")
            adj[ln.from_bus].append((k, ln.to_bus))
            adj[ln.to_bus].append((k, ln.from_bus))

        parent_line = {}
        upstream = {}
        order = [self.slack_bus]
        seen = {self.slack_bus}
        queue = deque([self.slack_bus])
        while queue:
            b = queue.popleft()
            for k, other in adj[b]:
                if other in seen:
                    if parent_line.get(b) != k:
                        raise NetworkTopologyError("network contains a loop")
                    continue
                seen.add(other)
                parent_line[other] = k
                upstream[k] = b
                order.append(other)
                queue.append(other)
        if len(seen) != len(ids):
            missing = sorted(set(ids) - seen)
            raise NetworkTopologyError(f"buses unreachable from slack: {', '.join(missing)}")

        n_l, n_b = len(lines), len(ids)
        line_from = np.empty(n_l, dtype=int)
        line_to = np.empty(n_l, dtype=int)
        for k in range(n_l):
            frm = upstream[k]
            to = lines[k].to_bus if lines[k].from_bus == frm else lines[k].from_bus
            line_from[k] = index[frm]
            line_to[k] = index[to]
        subtree = np.zeros((n_l, n_b))
        # walk each bus up to the slack, marking every line on its path
        for b in ids:
            node = b
            while node != self.slack_bus:
                k = parent_line[node]
                subtree[k, index[b]] = 1.0
                node = upstream[k]

        object.__setattr__(self, "bus_ids", tuple(ids))
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "line_from", line_from)
        object.__setattr__(self, "line_to", line_to)
        object.__setattr__(self, "z", np.array([ln.impedance for ln in lines], dtype=complex))
        object.__setattr__(self, "subtree", subtree)

    @property
    def slack_index(self) -> int:
        return self.index[self.slack_bus]

    @property
    def line_names(self) -> tuple[str, ...]:
        return tuple(ln.name for ln in self.lines)

    def injection_vector(self, injections) -> np.ndarray:
        """Accept a mapping ``bus -> W`` or an array aligned with ``bus_ids``."""
        if isinstance(injections, dict):
            s = np.zeros(len(self.bus_ids), dtype=complex)
            for b, v in injections.items():
                if b not in self.index:
                    raise KeyError(f"unknown bus {b!r}")
                s[self.index[b]] += v
            return s
        s = np.asarray(injections, dtype=complex)
        if s.shape != (len(self.bus_ids),):
            raise ValueError("injection array must align with bus_ids")
        return s


@dataclass(frozen=True, eq=False)
class PowerFlowSolution:
    network: FeederNetwork
    bus_voltages: np.ndarray  # complex V, aligned with network.bus_ids
    line_currents: np.ndarray  # complex A, from (upstream) -> to
    line_active_power: np.ndarray  # W at the sending end
    line_losses: np.ndarray  # W
    load_currents: np.ndarray  # complex A drawn at each bus
    grid_power: float  # W, positive = consumed from the grid
    iterations: int

    def voltage(self, bus: str) -> complex:
        return complex(self.bus_voltages[self.network.index[bus]])

    def voltage_pu(self) -> np.ndarray:
        return np.abs(self.bus_voltages) / self.network.nominal_voltage


def solve_power_flow(
    net: FeederNetwork,
    injections,
    slack_voltage: complex,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> PowerFlowSolution:
    """Backward-forward sweep with constant-power loads.

    ``injections`` are complex or real powers per bus, positive for
    consumption.  Converged when the largest voltage update is below ``tol``
    per unit of the nominal voltage.
    """
    s = net.injection_vector(injections)
    v0 = complex(slack_voltage)
    base = net.nominal_voltage
    d = net.subtree
    v = np.full(len(net.bus_ids), v0, dtype=complex)
    loaded = s != 0

    for it in range(1, max_iter + 1):
        i_load = np.zeros_like(v)
        i_load[loaded] = np.conj(s[loaded] / v[loaded])
        i_line = d @ i_load
        v_new = v0 - d.T @ (net.z * i_line)
        if not np.all(np.isfinite(v_new)) or np.any(np.abs(v_new[loaded]) < 1e-6 * base):
            raise PowerFlowError("voltage collapse during sweep; loading is infeasible")
        change = np.max(np.abs(v_new - v)) / base if len(v) else 0.0
        v = v_new
        if change < tol:
            break
    else:
        raise PowerFlowError(f"sweep did not converge in {max_iter} iterations (last change {change:.3e} pu)")

    i_load = np.zeros_like(v)
    i_load[loaded] = np.conj(s[loaded] / v[loaded])
    v_send = v[net.line_from]
    p_line = np.real(v_send * np.conj(i_line))
    losses = np.real(net.z) * np.abs(i_line) ** 2
    k0 = net.slack_index
    root_lines = net.line_from == k0
    grid = float(np.real(v0 * np.conj(i_line[root_lines].sum() + i_load[k0])))
    return PowerFlowSolution(net, v, i_line, p_line, losses, i_load, grid, it)


def grid_draw(solution: PowerFlowSolution) -> float:
    """Active power at the slack bus; negative when power flows back to the grid."""
    return solution.grid_power


def kcl_residual(solution: PowerFlowSolution) -> np.ndarray:
    """Per-bus current mismatch (A) between incoming, outgoing and load currents."""
    net = solution.network
    n = len(net.bus_ids)
    into = np.zeros(n, dtype=complex)
    out = np.zeros(n, dtype=complex)
    np.add.at(into, net.line_to, solution.line_currents)
    np.add.at(out, net.line_from, solution.line_currents)
    s = solution.load_currents
    res = into - out - s
    res[net.slack_index] = 0.0
    return np.abs(res)


def line_residual(solution: PowerFlowSolution) -> np.ndarray:
    """|V_from - V_to - Z I| per line, in volts."""
    net = solution.network
    v = solution.bus_voltages
    return np.abs(v[net.line_from] - v[net.line_to] - net.z * solution.line_currents)
