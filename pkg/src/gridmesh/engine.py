"""Community co-simulation: per-step coupling of the three system agents.

Each step runs a Gauss-Seidel sweep transport -> comms -> energy and
repeats it until the coupling variables (charging vehicles per block,
packet loss per road, power drawn by each block) stop changing.  The sweep
is a pure function of the state at the start of the step and the latest
iterate of the coupling variables, so repeating it is safe.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import comms, energy, transport
from .powerflow import Bus, FeederNetwork, Line, PowerFlowSolution, solve_power_flow
from .scenario import LOAD_KINDS, ScenarioConfig, ValidationError, resolve_node
from .trace import TraceError, TraceSet

log = logging.getLogger(__name__)


class CouplingMode(enum.Enum):
    ENERGY_ONLY = "e"
    ENERGY_TRANSPORT = "et"
    ENERGY_TRANSPORT_COMM = "etc"

    @classmethod
    def parse(cls, value: "str | CouplingMode") -> "CouplingMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown coupling mode {value!r}; use e, et or etc") from None

    @property
    def has_transport(self) -> bool:
        return self is not CouplingMode.ENERGY_ONLY

    @property
    def has_comm_feedback(self) -> bool:
        return self is CouplingMode.ENERGY_TRANSPORT_COMM


class SimulationError(RuntimeError):
    pass


class CouplingError(SimulationError):
    def __init__(self, t: float, residual: float, iterations: int):
        self.t, self.residual, self.iterations = t, residual, iterations
        super().__init__(
            f"t={t:g} s: coupling did not converge after {iterations} iterations (residual {residual:.3e})"
        )


@dataclass(frozen=True)
class EnergySignals:
    """Signals exchanged between agents; price and energy control are constants."""

    lmp: float = 0.0
    sig_e: float = 0.0
    sig_t: tuple[float, ...] = ()  # packet loss per road


@dataclass(frozen=True)
class BlockState:
    battery: energy.BatteryState
    parking: transport.BlockParking
    comm: comms.CommState
    p_bui: float = 0.0
    p_ev: float = 0.0
    p_com: float = 0.0
    p_gen: float = 0.0
    p_pv: float = 0.0
    p_win: float = 0.0


@dataclass(frozen=True)
class SimulationState:
    t: float
    blocks: tuple[BlockState, ...]
    roads: tuple[transport.RoadState, ...]
    signals: EnergySignals
    coupling: tuple[float, ...] = ()  # accepted coupling variables of the previous step


def check_mode(config: ScenarioConfig, mode: CouplingMode) -> None:
    """Reject configurations missing the inputs a coupling mode needs."""
    problems = []
    if mode is CouplingMode.ENERGY_ONLY:
        for i, b in enumerate(config.blocks):
            if b.prescribed_ev_power is None:
                problems.append((f"blocks[{i}].prescribed_ev_power", "required in mode 'e'"))
            if b.prescribed_throughput is None:
                problems.append((f"blocks[{i}].prescribed_throughput", "required in mode 'e'"))
    if mode is CouplingMode.ENERGY_TRANSPORT_COMM:
        for i, r in enumerate(config.roads):
            if r.comm_link is None:
                problems.append((f"roads[{i}].comm_link", "communication parameters required in mode 'etc'"))
    if problems:
        raise ValidationError(problems)


def build_network(config: ScenarioConfig) -> FeederNetwork:
    """Merge the grid node, community lines and every block feeder into one radial network."""
    buses = [Bus(config.grid_bus)]
    lines = []
    for ln in config.community_lines:
        z = complex(ln.r, ln.x)
        lines.append(Line(ln.name, resolve_node(config, ln.from_node), resolve_node(config, ln.to_node), z, ln.p_max))
    for b in config.blocks:
        for bus in b.feeder.buses:
            kinds = [k for k, f in bus.attach if k in LOAD_KINDS and f > 0]
            buses.append(Bus(f"{b.name}.{bus.id}", kinds[0] if kinds else "none"))
        for ln in b.feeder.lines:
            lines.append(
                Line(f"{b.name}.{ln.name}", f"{b.name}.{ln.from_bus}", f"{b.name}.{ln.to_bus}", complex(ln.r, ln.x), ln.p_max)
            )
    return FeederNetwork(tuple(buses), tuple(lines), config.grid_bus, config.grid_voltage)


class CommunityModel:
    """Compiled, read-only form of a scenario for one coupling mode."""

    def __init__(self, config: ScenarioConfig, mode: CouplingMode | str):
        self.config = config
        self.mode = CouplingMode.parse(mode)
        check_mode(config, self.mode)
        self.network = build_network(config)
        net = self.network

        self.block_names = tuple(b.name for b in config.blocks)
        self.road_names = tuple(r.name for r in config.roads)
        bidx = {n: i for i, n in enumerate(self.block_names)}
        self.roads_from = [[j for j, r in enumerate(config.roads) if r.from_block == n] for n in self.block_names]
        self.roads_to = [[j for j, r in enumerate(config.roads) if r.to_block == n] for n in self.block_names]

        # placement[kind] is (n_blocks x n_buses): share of each block quantity on each bus
        kinds = ("building", "ev", "comm", "general", "pv", "wind", "battery")
        self.placement = {}
        for kind in kinds:
            m = np.zeros((len(self.block_names), len(net.bus_ids)))
            for i, b in enumerate(config.blocks):
                for bus, frac in b.feeder.attachment(kind).items():
                    m[i, net.index[f"{b.name}.{bus}"]] = frac
            self.placement[kind] = m
        self.bus_block = np.full(len(net.bus_ids), -1)
        for bus, k in net.index.items():
            if "." in bus:
                self.bus_block[k] = bidx[bus.split(".")[0]]
        self.line_block = np.full(len(net.lines), -1)
        for k, ln in enumerate(net.lines):
            a, b = self.bus_block[net.line_from[k]], self.bus_block[net.line_to[k]]
            if a == b and a >= 0:
                self.line_block[k] = a

        w = config.weather
        self._weather = np.column_stack(
            [w.dni.array, w.sky_diffuse.array, w.ground_diffuse.array, w.cos_theta.array, w.wind_speed.array]
        )
        self._p_i = np.column_stack([b.charge_probability.array for b in config.blocks]) if config.blocks else None
        self._bui = np.column_stack([b.building_load.array for b in config.blocks]) if config.blocks else None
        n_pts = len(w.dni)
        self._gen = np.column_stack(
            [b.general_load.array if b.general_load is not None else np.zeros(n_pts) for b in config.blocks]
        ) if config.blocks else None
        self._ev_prescribed = [b.prescribed_ev_power for b in config.blocks]
        self._q_prescribed = [b.prescribed_throughput for b in config.blocks]
        self._q_in = [r.inflow.array for r in config.roads]

    # -- layout ----------------------------------------------------------------

    def layout(self) -> dict[str, tuple[str, ...]]:
        blocks, roads = self.block_names, self.road_names
        out = {
            "grid_power": ("community",) + blocks,
            "bus_voltage": self.network.bus_ids,
            "line_power": self.network.line_names,
            "line_loss": self.network.line_names,
        }
        for q in ("soc", "battery_power", "p_pv", "p_win", "p_bui", "p_gen", "p_ev", "p_com",
                  "tower_throughput", "n_parked", "n_char"):
            out[q] = blocks
        if self.mode.has_transport:
            for q in ("q_in", "q_out", "v_ave", "u_ave", "t_travel", "vehicles", "delay_factor", "q_c", "gamma"):
                out[q] = roads
        out["coupling_iterations"] = ("community",)
        out["coupling_residual"] = ("community",)
        return out

    def initial_state(self) -> SimulationState:
        cfg = self.config
        blocks = tuple(
            BlockState(
                battery=energy.BatteryState(b.battery.initial_soc),
                parking=transport.BlockParking(b.initial_ev_count),
                comm=comms.CommState(),
            )
            for b in cfg.blocks
        )
        roads = tuple(transport.RoadState.empty(r, cfg.sim_start) for r in cfg.roads)
        signals = EnergySignals(cfg.lmp, cfg.sig_e, tuple(0.0 for _ in cfg.roads))
        return SimulationState(cfg.sim_start, blocks, roads, signals)

    def _index(self, t: float) -> int:
        cfg = self.config
        k = int(round((t - cfg.sim_start) / cfg.dt))
        n = len(cfg.weather.dni)
        if not 0 <= k < n or abs(cfg.sim_start + k * cfg.dt - t) > 1e-6 * cfg.dt:
            raise SimulationError(f"t={t:g} s is not on the simulation grid")
        return k

    # -- one step ----------------------------------------------------------------

    def _sweep(self, state: SimulationState, k: int, t: float, dt: float, gamma_in: list[float]):
        cfg = self.config
        mode = self.mode
        nb, nr = len(cfg.blocks), len(cfg.roads)

        # (1) transport
        roads = list(state.roads)
        parking = [bs.parking for bs in state.blocks]
        delay = [1.0] * nr
        n_char = [0.0] * nb
        if mode.has_transport:
            for j, spec in enumerate(cfg.roads):
                if mode.has_comm_feedback:
                    delay[j] = comms.delay_factor(gamma_in[j])
                roads[j] = transport.road_step(state.roads[j], float(self._q_in[j][k]), delay[j], spec, t, dt)
            for i in range(nb):
                inflows = [roads[j].q_out for j in self.roads_to[i]]
                outflows = [float(self._q_in[j][k]) for j in self.roads_from[i]]
                parking[i] = transport.parking_step(state.blocks[i].parking, inflows, outflows, dt)
                n_char[i] = transport.charging_count(state.blocks[i].parking.n_parked, float(self._p_i[k, i]))
        else:
            for i, b in enumerate(cfg.blocks):
                p_ev = self._ev_prescribed[i].values[k]
                n_char[i] = p_ev / b.ev_charge_power if b.ev_charge_power > 0 else 0.0

        # (2) comms
        q_c = [0.0] * nr
        gamma = [0.0] * nr
        tower_q = [0.0] * nb
        if mode.has_transport:
            for j, spec in enumerate(cfg.roads):
                link = spec.comm_link
                if link is None:
                    continue
                q_c[j] = comms.throughput_from_traffic(state.roads[j].vehicles_on_road, link.c_pkt)
                if mode.has_comm_feedback:
                    gamma[j] = comms.packet_loss(q_c[j], link.kappa, link.c_c)
            for i in range(nb):
                tower_q[i] = math.fsum(q_c[j] for j in self.roads_from[i])
        else:
            for i in range(nb):
                tower_q[i] = self._q_prescribed[i].values[k]

        # (3) energy
        dni, sky, ground, cos_theta, wind_speed = self._weather[k]
        g = energy.pv_irradiance(dni, sky, ground, cos_theta)
        blocks = []
        per_kind = {kind: np.zeros(nb) for kind in self.placement}
        for i, b in enumerate(cfg.blocks):
            p_pv = energy.pv_power(g, b.pv)
            p_win = energy.wind_power(wind_speed, b.wind)
            if mode.has_transport:
                p_ev = energy.ev_charging_power(n_char[i], b.ev_charge_power)
            else:
                p_ev = self._ev_prescribed[i].values[k]
            p_com = energy.comm_tower_power(tower_q[i], b.comm)
            p_bui = float(self._bui[k, i])
            p_gen = float(self._gen[k, i])
            demand = p_bui + p_ev + p_com + p_gen
            bat = energy.battery_step(state.blocks[i].battery, p_pv + p_win, demand, b.battery, dt)
            per_kind["building"][i] = p_bui
            per_kind["ev"][i] = p_ev
            per_kind["comm"][i] = p_com
            per_kind["general"][i] = p_gen
            per_kind["pv"][i] = -p_pv
            per_kind["wind"][i] = -p_win
            per_kind["battery"][i] = bat.power
            blocks.append(
                BlockState(bat, parking[i], comms.CommState(tower_q[i], 0.0), p_bui, p_ev, p_com, p_gen, p_pv, p_win)
            )
        injections = sum(per_kind[kind] @ self.placement[kind] for kind in self.placement)
        sol = solve_power_flow(self.network, injections, cfg.grid_voltage)
        block_power = np.zeros(nb)
        np.add.at(block_power, self.bus_block[self.bus_block >= 0], injections[self.bus_block >= 0])
        inside = self.line_block >= 0
        np.add.at(block_power, self.line_block[inside], sol.line_losses[inside])

        coupling = np.concatenate([n_char, gamma, block_power])
        return {
            "roads": roads,
            "blocks": blocks,
            "solution": sol,
            "block_power": block_power,
            "n_char": n_char,
            "q_c": q_c,
            "gamma": gamma,
            "delay": delay,
            "coupling": coupling,
        }

    def step(self, state: SimulationState, t: float, dt: float):
        """Advance ``state`` from ``t`` to ``t + dt``; return ``(new_state, record)``."""
        cfg = self.config
        k = self._index(t)
        # warm start from the previous step; its coupling values are the
        # reference for the first residual
        gamma_guess = list(state.signals.sig_t)
        prev = np.asarray(state.coupling, dtype=float) if state.coupling else None
        residual = math.inf
        for it in range(1, cfg.coupling_max_iters + 1):
            out = self._sweep(state, k, t, dt, gamma_guess)
            x = out["coupling"]
            if prev is not None:
                residual = _relative_change(x, prev)
                if residual < cfg.coupling_tolerance:
                    break
            prev = x
            gamma_guess = out["gamma"]
        else:
            raise CouplingError(t, residual, cfg.coupling_max_iters)

        new_state = SimulationState(
            t + dt,
            tuple(out["blocks"]),
            tuple(out["roads"]),
            EnergySignals(cfg.lmp, cfg.sig_e, tuple(out["gamma"])),
            tuple(out["coupling"].tolist()),
        )
        return new_state, self._record(state, out, it, residual)

    def _record(self, state: SimulationState, out: dict, iterations: int, residual: float) -> dict:
        sol: PowerFlowSolution = out["solution"]
        blocks = out["blocks"]
        rec = {
            "grid_power": np.concatenate([[sol.grid_power], out["block_power"]]),
            "bus_voltage": sol.voltage_pu(),
            "line_power": sol.line_active_power,
            "line_loss": sol.line_losses,
            "soc": [bs.battery.soc for bs in state.blocks],
            "battery_power": [bs.battery.power for bs in blocks],
            "p_pv": [bs.p_pv for bs in blocks],
            "p_win": [bs.p_win for bs in blocks],
            "p_bui": [bs.p_bui for bs in blocks],
            "p_gen": [bs.p_gen for bs in blocks],
            "p_ev": [bs.p_ev for bs in blocks],
            "p_com": [bs.p_com for bs in blocks],
            "tower_throughput": [bs.comm.q_c for bs in blocks],
            "n_parked": [bs.parking.n_parked for bs in state.blocks],
            "n_char": out["n_char"],
            "coupling_iterations": [float(iterations)],
            "coupling_residual": [residual],
        }
        if self.mode.has_transport:
            roads = out["roads"]
            k = self._index(state.t)
            rec.update(
                q_in=[float(q[k]) for q in self._q_in],
                q_out=[r.q_out for r in roads],
                v_ave=[r.v_ave for r in roads],
                u_ave=[r.u_ave for r in roads],
                t_travel=[r.t_travel for r in roads],
                vehicles=[r.vehicles_on_road for r in state.roads],
                delay_factor=out["delay"],
                q_c=out["q_c"],
                gamma=out["gamma"],
            )
        return rec


def _relative_change(x: np.ndarray, prev: np.ndarray) -> float:
    diff = np.abs(x - prev)
    scale = np.maximum(np.abs(x), np.abs(prev))
    rel = np.divide(diff, scale, out=np.zeros_like(diff), where=scale > 0)
    return float(rel.max()) if len(rel) else 0.0


def step(model: CommunityModel, state: SimulationState, t: float, dt: float):
    return model.step(state, t, dt)


def run(config: ScenarioConfig, mode: CouplingMode | str) -> TraceSet:
    """Simulate ``[sim_start, sim_end)`` and return the full trace."""
    model = CommunityModel(config, mode)
    state = model.initial_state()
    n = config.n_steps
    times = config.sim_start + config.dt * np.arange(n, dtype=float)
    records = []
    for t in times:
        try:
            state, rec = model.step(state, float(t), config.dt)
        except CouplingError:
            raise
        except Exception as exc:
            raise SimulationError(f"t={t:g} s: {exc}") from exc
        records.append(rec)
    log.info("%s: %d steps in mode %s", config.name, n, model.mode.value)
    return TraceSet.from_records(times, model.layout(), records)


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------


class GridMismatchError(TraceError):
    pass


@dataclass
class DeviationReport:
    """Relative deviation of ``quantity`` in trace b with respect to trace a.

    ``deviation`` has one column per element; values are fractions
    (0.07 = 7 %).
    """

    quantity: str
    times: np.ndarray
    columns: tuple[str, ...]
    deviation: np.ndarray

    @property
    def peak(self) -> float:
        return float(self.deviation.max()) if self.deviation.size else 0.0

    @property
    def peak_time(self) -> float | None:
        if not self.deviation.size:
            return None
        k = int(np.unravel_index(np.argmax(self.deviation), self.deviation.shape)[0])
        return float(self.times[k])

    @property
    def peak_element(self) -> str | None:
        if not self.deviation.size:
            return None
        return self.columns[int(np.unravel_index(np.argmax(self.deviation), self.deviation.shape)[1])]

    @property
    def mean(self) -> float:
        return float(self.deviation.mean()) if self.deviation.size else 0.0

    def element(self, name: str) -> dict:
        col = self.deviation[:, self.columns.index(name)]
        k = int(np.argmax(col))
        return {"peak": float(col[k]), "peak_time": float(self.times[k]), "mean": float(col.mean())}

    def summary(self) -> dict:
        return {
            "quantity": self.quantity,
            "peak": self.peak,
            "peak_time": self.peak_time,
            "peak_element": self.peak_element,
            "mean": self.mean,
            "elements": {c: self.element(c) for c in self.columns} if len(self.times) else {},
        }

    def csv_text(self) -> str:
        lines = [",".join(("time_s",) + self.columns)]
        for k, t in enumerate(self.times):
            lines.append(",".join([repr(float(t))] + [repr(float(x)) for x in self.deviation[k]]))
        return "\n".join(lines) + "\n"


def compare(trace_a: TraceSet, trace_b: TraceSet, quantity: str) -> DeviationReport:
    """Per-step relative deviation ``|b - a| / |a|`` of one quantity."""
    for tr in (trace_a, trace_b):
        if quantity not in tr.data:
            raise TraceError(f"trace has no quantity {quantity!r}")
    if trace_a.times.shape != trace_b.times.shape or not np.array_equal(trace_a.times, trace_b.times):
        raise GridMismatchError(
            f"time grids differ (a: {len(trace_a.times)} steps, dt={trace_a.dt}; "
            f"b: {len(trace_b.times)} steps, dt={trace_b.dt})"
        )
    if trace_a.columns[quantity] != trace_b.columns[quantity]:
        raise GridMismatchError(f"{quantity}: element sets differ between traces")
    a = trace_a.data[quantity]
    b = trace_b.data[quantity]
    diff = np.abs(b - a)
    mag = np.abs(a)
    dev = np.where(diff == 0, 0.0, np.divide(diff, mag, out=np.full_like(diff, np.inf), where=mag > 0))
    return DeviationReport(quantity, trace_a.times.copy(), trace_a.columns[quantity], dev)
