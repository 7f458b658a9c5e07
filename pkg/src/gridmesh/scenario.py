"""Scenario description: parsing, validation and resampling of all inputs.

A scenario is a YAML document (conventionally with a ``.scn`` suffix) that
declares the blocks of a community, the roads and power lines linking them,
device parameters, and the time series driving the simulation.  Series are
either stored in sidecar CSV files (``time_s,value`` header, paths relative
to the scenario file) or written inline.

Everything returned by :func:`load_scenario` is immutable and already
resampled onto the simulation grid.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np
import yaml

# libyaml bindings when present; dumped scenarios with inline samples get large
_Loader = getattr(yaml, "CSafeLoader", yaml.SafeLoader)
_Dumper = getattr(yaml, "CSafeDumper", yaml.SafeDumper)

LINEAR = "linear"
STEP = "step"
INTERPOLATIONS = (LINEAR, STEP)

# bus attachment kinds; loads consume, generators and the battery follow the
# sign of their own power
LOAD_KINDS = ("building", "ev", "comm", "general")
ATTACH_KINDS = LOAD_KINDS + ("pv", "wind", "battery")

GRID_NODE_DEFAULT = "grid"


class ScenarioError(Exception):
    """Base class for every problem found while reading a scenario."""


class ScenarioParseError(ScenarioError):
    pass


class MissingSeriesError(ScenarioError):
    pass


class CoverageError(ScenarioError):
    pass


class ValidationError(ScenarioError):
    """Raised with the full list of ``(field, message)`` problems."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = list(problems)
        lines = [f"{where}: {msg}" for where, msg in self.problems]
        super().__init__("invalid scenario:\n  " + "\n  ".join(lines))

    @property
    def fields(self) -> list[str]:
        return [where for where, _ in self.problems]


# ---------------------------------------------------------------------------
# Time series
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeSeriesProfile:
    times: tuple[float, ...]
    values: tuple[float, ...]
    interpolation: str = LINEAR

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.times) != len(self.values):
            raise ValueError("times and values differ in length")
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("sample times must be strictly increasing")

    @classmethod
    def constant(cls, value: float, t: float = 0.0) -> "TimeSeriesProfile":
        return cls((t,), (value,), STEP)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __len__(self) -> int:
        return len(self.times)

    def min(self) -> float:
        return min(self.values)

    def max(self) -> float:
        return max(self.values)


def grid_points(start: float, end: float, dt: float) -> np.ndarray:
    """Inclusive grid ``start, start+dt, ..., <= end``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = int(math.floor((end - start) / dt + 1e-9))
    if n < 0:
        return np.empty(0)
    return start + dt * np.arange(n + 1, dtype=float)


def resample(
    profile: TimeSeriesProfile,
    grid: tuple[float, float, float],
    max_hold: float | None = None,
) -> TimeSeriesProfile:
    """Resample ``profile`` onto the inclusive grid ``(start, end, dt)``.

    Linear profiles are interpolated, step profiles hold the previous
    sample.  Outside its span a profile is extended by holding its boundary
    value, but only by ``max_hold`` seconds; the default is one sample
    spacing of the profile itself (unlimited for a single-sample profile).
    """
    if len(profile) == 0:
        raise CoverageError("empty profile cannot cover any grid")
    start, end, dt = grid
    pts = grid_points(start, end, dt)
    times = np.asarray(profile.times)
    values = np.asarray(profile.values)

    if max_hold is None:
        max_hold = math.inf if len(times) == 1 else float(np.max(np.diff(times)))
    if len(pts):
        if pts[0] < times[0] - max_hold or pts[-1] > times[-1] + max_hold:
            raise CoverageError(
                f"profile spans [{times[0]:g}, {times[-1]:g}] s and cannot reach "
                f"grid [{pts[0]:g}, {pts[-1]:g}] s with a {max_hold:g} s hold"
            )

    if profile.interpolation == LINEAR:
        out = np.interp(pts, times, values)
    else:
        idx = np.searchsorted(times, pts, side="right") - 1
        out = values[np.clip(idx, 0, len(values) - 1)]
    return TimeSeriesProfile(tuple(pts.tolist()), tuple(out.tolist()), profile.interpolation)


def read_series_csv(path: Path, interpolation: str = LINEAR) -> TimeSeriesProfile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingSeriesError(f"series file not found: {path}") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["time_s", "value"]:
        raise ScenarioParseError(f"{path}: expected header 'time_s,value'")
    times, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 2:
            raise ScenarioParseError(f"{path}:{lineno}: expected two columns")
        try:
            times.append(float(row[0]))
            values.append(float(row[1]))
        except ValueError:
            raise ScenarioParseError(f"{path}:{lineno}: non-numeric value") from None
    try:
        return TimeSeriesProfile(tuple(times), tuple(values), interpolation)
    except ValueError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from None


def write_series_csv(path: Path, profile: TimeSeriesProfile) -> None:
    lines = ["time_s,value"]
    lines += [f"{t!r},{v!r}" for t, v in zip(profile.times, profile.values)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# Parameter records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PvArray:
    area: float
    f_act: float = 1.0
    efficiency: float = 0.15
    eta_dcac: float = 0.95


@dataclass(frozen=True)
class PvParams:
    arrays: tuple[PvArray, ...] = ()


@dataclass(frozen=True)
class WindParams:
    """Identical turbines sharing a piecewise-linear power curve (m/s -> W)."""

    count: int = 0
    curve: tuple[tuple[float, float], ...] = ()
    scale: float = 1.0
    eta_dcac: float = 1.0


@dataclass(frozen=True)
class BatteryParams:
    capacity_wh: float
    max_charge_w: float
    max_discharge_w: float
    charge_threshold_w: float = 0.0
    discharge_threshold_w: float = 0.0
    initial_soc: float = 0.5


@dataclass(frozen=True)
class CommTowerParams:
    count: int = 1
    e_elec: float = 0.0  # J/packet
    eps_elec: float = 0.0  # J/(packet m^alpha)
    distance: float = 0.0  # m
    alpha: float = 2.0


@dataclass(frozen=True)
class CommLinkParams:
    kappa: float
    c_c: float  # packets/s loss threshold
    c_pkt: float  # packets/s per vehicle on the road


@dataclass(frozen=True)
class BusSpec:
    id: str
    attach: tuple[tuple[str, float], ...] = ()


@dataclass(frozen=True)
class LineSpec:
    name: str
    from_bus: str
    to_bus: str
    r: float
    x: float
    p_max: float


@dataclass(frozen=True)
class FeederSpec:
    root: str
    buses: tuple[BusSpec, ...]
    lines: tuple[LineSpec, ...]

    def attachment(self, kind: str) -> dict[str, float]:
        """Share of a block-level quantity placed on each bus.

        Kinds not attached anywhere land entirely on the root bus.
        """
        shares = {b.id: f for b in self.buses for k, f in b.attach if k == kind}
        return shares or {self.root: 1.0}


@dataclass(frozen=True)
class InterBlockLineSpec:
    """Community power line; endpoints are ``grid``, ``<block>`` or ``<block>.<bus>``."""

    name: str
    from_node: str
    to_node: str
    r: float
    x: float
    p_max: float


@dataclass(frozen=True)
class BlockSpec:
    name: str
    pv: PvParams
    wind: WindParams
    battery: BatteryParams
    feeder: FeederSpec
    initial_ev_count: float
    charge_probability: TimeSeriesProfile
    ev_charge_power: float
    building_load: TimeSeriesProfile
    comm: CommTowerParams
    general_load: TimeSeriesProfile | None = None
    prescribed_ev_power: TimeSeriesProfile | None = None
    prescribed_throughput: TimeSeriesProfile | None = None


@dataclass(frozen=True)
class RoadSpec:
    name: str
    from_block: str
    to_block: str
    length: float
    capacity: float  # vehicles/h
    design_speed: float  # m/s
    alpha1: float
    alpha2: float
    alpha3: float
    inflow: TimeSeriesProfile  # vehicles/h leaving from_block onto the road
    comm_link: CommLinkParams | None = None

    @property
    def free_flow_speed(self) -> float:
        return self.alpha1 * self.design_speed


@dataclass(frozen=True)
class WeatherSeries:
    dni: TimeSeriesProfile
    sky_diffuse: TimeSeriesProfile
    ground_diffuse: TimeSeriesProfile
    cos_theta: TimeSeriesProfile
    wind_speed: TimeSeriesProfile


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    blocks: tuple[BlockSpec, ...]
    roads: tuple[RoadSpec, ...]
    community_lines: tuple[InterBlockLineSpec, ...]
    weather: WeatherSeries
    sim_start: float = 0.0
    sim_end: float = 86400.0
    dt: float = 60.0
    coupling_tolerance: float = 1e-8
    coupling_max_iters: int = 50
    grid_bus: str = GRID_NODE_DEFAULT
    grid_voltage: float = 12470.0
    peak_windows: tuple[tuple[float, float], ...] = ()
    lmp: float = 0.0
    sig_e: float = 0.0

    @property
    def grid(self) -> tuple[float, float, float]:
        return (self.sim_start, self.sim_end, self.dt)

    @property
    def n_steps(self) -> int:
        if self.sim_end <= self.sim_start:
            return 0
        return int(math.floor((self.sim_end - self.sim_start) / self.dt + 1e-9))

    def block(self, name: str) -> BlockSpec:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def in_peak(self, t: float) -> bool:
        return any(a <= t <= b for a, b in self.peak_windows)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


class _Reader:
    """Pulls typed fields out of nested mappings, collecting problems."""

    def __init__(self, base_dir: Path | None):
        self.base_dir = base_dir
        self.problems: list[tuple[str, str]] = []

    def fail(self, where: str, msg: str) -> None:
        self.problems.append((where, msg))

    def mapping(self, raw: Any, where: str) -> Mapping:
        if raw is None:
            return {}
        if not isinstance(raw, Mapping):
            self.fail(where, "expected a mapping")
            return {}
        return raw

    def seq(self, raw: Any, where: str) -> list:
        if raw is None:
            return []
        if not isinstance(raw, (list, tuple)):
            self.fail(where, "expected a list")
            return []
        return list(raw)

    def number(self, d: Mapping, key: str, where: str, default: Any = ...) -> float:
        path = f"{where}.{key}" if where else key
        if key not in d:
            if default is ...:
                self.fail(path, "missing required field")
                return math.nan
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(path, f"expected a number, got {v!r}")
            return math.nan
        return float(v)

    def integer(self, d: Mapping, key: str, where: str, default: Any = ...) -> int:
        v = self.number(d, key, where, default)
        if isinstance(v, float) and not math.isnan(v) and v != int(v):
            self.fail(f"{where}.{key}", "expected an integer")
        return int(v) if v == v else 0

    def text(self, d: Mapping, key: str, where: str, default: Any = ...) -> str:
        path = f"{where}.{key}" if where else key
        if key not in d:
            if default is ...:
                self.fail(path, "missing required field")
                return ""
            return default
        v = d[key]
        if not isinstance(v, str):
            self.fail(path, f"expected a string, got {v!r}")
            return ""
        return v

    def series(self, raw: Any, where: str, grid, optional: bool = False) -> TimeSeriesProfile | None:
        if raw is None:
            if not optional:
                self.fail(where, "missing required series")
            return None
        scale = 1.0
        interp = LINEAR
        if isinstance(raw, bool):
            self.fail(where, "expected a series reference")
            return None
        if isinstance(raw, (int, float)):
            prof = TimeSeriesProfile.constant(float(raw), grid[0])
        elif isinstance(raw, str):
            prof = read_series_csv(self._resolve(raw), LINEAR)
        elif isinstance(raw, Mapping):
            interp = raw.get("interpolation", LINEAR)
            if interp not in INTERPOLATIONS:
                self.fail(f"{where}.interpolation", f"must be one of {INTERPOLATIONS}")
                return None
            scale = self.number(raw, "scale", where, 1.0)
            try:
                if "file" in raw:
                    prof = read_series_csv(self._resolve(str(raw["file"])), interp)
                elif "samples" in raw:
                    pairs = [tuple(p) for p in self.seq(raw["samples"], f"{where}.samples")]
                    if any(len(p) != 2 for p in pairs):
                        self.fail(f"{where}.samples", "each sample must be [time_s, value]")
                        return None
                    prof = TimeSeriesProfile(
                        tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), interp
                    )
                elif "constant" in raw:
                    prof = TimeSeriesProfile.constant(self.number(raw, "constant", where), grid[0])
                else:
                    self.fail(where, "series needs one of 'file', 'samples', 'constant'")
                    return None
            except (ValueError, TypeError) as exc:
                self.fail(where, str(exc))
                return None
        else:
            self.fail(where, f"cannot interpret series {raw!r}")
            return None
        if scale != 1.0:
            prof = TimeSeriesProfile(prof.times, tuple(v * scale for v in prof.values), prof.interpolation)
        try:
            return resample(prof, grid)
        except CoverageError as exc:
            self.fail(where, str(exc))
            return None

    def _resolve(self, ref: str) -> Path:
        p = Path(ref)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p


def _pv(r: _Reader, raw: Any, where: str) -> PvParams:
    items = raw if isinstance(raw, (list, tuple)) else ([raw] if raw else [])
    arrays = []
    for i, a in enumerate(items):
        w = f"{where}[{i}]" if isinstance(raw, (list, tuple)) else where
        a = r.mapping(a, w)
        arrays.append(
            PvArray(
                area=r.number(a, "area", w),
                f_act=r.number(a, "f_act", w, 1.0),
                efficiency=r.number(a, "efficiency", w, 0.15),
                eta_dcac=r.number(a, "eta_dcac", w, 0.95),
            )
        )
    return PvParams(tuple(arrays))


def _wind(r: _Reader, raw: Any, where: str) -> WindParams:
    d = r.mapping(raw, where)
    if not d:
        return WindParams()
    curve = []
    for i, pt in enumerate(r.seq(d.get("curve"), f"{where}.curve")):
        if not isinstance(pt, (list, tuple)) or len(pt) != 2:
            r.fail(f"{where}.curve[{i}]", "expected [speed_m_s, power_w]")
            continue
        curve.append((float(pt[0]), float(pt[1])))
    return WindParams(
        count=r.integer(d, "count", where, 1),
        curve=tuple(curve),
        scale=r.number(d, "scale", where, 1.0),
        eta_dcac=r.number(d, "eta_dcac", where, 1.0),
    )


def _battery(r: _Reader, raw: Any, where: str) -> BatteryParams:
    d = r.mapping(raw, where)
    rated = r.number(d, "max_power", where, None)
    return BatteryParams(
        capacity_wh=r.number(d, "capacity_wh", where),
        max_charge_w=r.number(d, "max_charge_w", where, rated if rated is not None else ...),
        max_discharge_w=r.number(d, "max_discharge_w", where, rated if rated is not None else ...),
        charge_threshold_w=r.number(d, "charge_threshold_w", where, 0.0),
        discharge_threshold_w=r.number(d, "discharge_threshold_w", where, 0.0),
        initial_soc=r.number(d, "initial_soc", where, 0.5),
    )


def _comm_tower(r: _Reader, raw: Any, where: str) -> CommTowerParams:
    d = r.mapping(raw, where)
    return CommTowerParams(
        count=r.integer(d, "count", where, 1),
        e_elec=r.number(d, "e_elec", where, 0.0),
        eps_elec=r.number(d, "eps_elec", where, 0.0),
        distance=r.number(d, "distance", where, 0.0),
        alpha=r.number(d, "alpha", where, 2.0),
    )


def _feeder(r: _Reader, raw: Any, where: str) -> FeederSpec:
    d = r.mapping(raw, where)
    buses = []
    for i, b in enumerate(r.seq(d.get("buses"), f"{where}.buses")):
        w = f"{where}.buses[{i}]"
        if isinstance(b, str):
            buses.append(BusSpec(b))
            continue
        b = r.mapping(b, w)
        attach = r.mapping(b.get("attach"), f"{w}.attach")
        pairs = []
        for k, v in attach.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                r.fail(f"{w}.attach.{k}", "expected a fraction")
                continue
            pairs.append((str(k), float(v)))
        buses.append(BusSpec(str(b.get("id", "")), tuple(pairs)))
    lines = []
    for i, ln in enumerate(r.seq(d.get("lines"), f"{where}.lines")):
        w = f"{where}.lines[{i}]"
        ln = r.mapping(ln, w)
        lines.append(
            LineSpec(
                name=r.text(ln, "name", w, f"l{i + 1}"),
                from_bus=r.text(ln, "from", w),
                to_bus=r.text(ln, "to", w),
                r=r.number(ln, "r", w),
                x=r.number(ln, "x", w, 0.0),
                p_max=r.number(ln, "p_max", w, math.inf),
            )
        )
    root = r.text(d, "root", where, buses[0].id if buses else "")
    return FeederSpec(root=root, buses=tuple(buses), lines=tuple(lines))


def _block(r: _Reader, raw: Any, where: str, grid) -> BlockSpec:
    d = r.mapping(raw, where)
    name = r.text(d, "name", where)
    return BlockSpec(
        name=name,
        pv=_pv(r, d.get("pv"), f"{where}.pv"),
        wind=_wind(r, d.get("wind"), f"{where}.wind"),
        battery=_battery(r, d.get("battery"), f"{where}.battery"),
        feeder=_feeder(r, d.get("feeder"), f"{where}.feeder"),
        initial_ev_count=r.number(d, "initial_ev_count", where, 0.0),
        charge_probability=r.series(d.get("charge_probability"), f"{where}.charge_probability", grid),
        ev_charge_power=r.number(d, "ev_charge_power", where, 0.0),
        building_load=r.series(d.get("building_load"), f"{where}.building_load", grid),
        comm=_comm_tower(r, d.get("comm"), f"{where}.comm"),
        general_load=r.series(d.get("general_load"), f"{where}.general_load", grid, optional=True),
        prescribed_ev_power=r.series(
            d.get("prescribed_ev_power"), f"{where}.prescribed_ev_power", grid, optional=True
        ),
        prescribed_throughput=r.series(
            d.get("prescribed_throughput"), f"{where}.prescribed_throughput", grid, optional=True
        ),
    )


def _road(r: _Reader, raw: Any, where: str, grid) -> RoadSpec:
    d = r.mapping(raw, where)
    link = None
    if d.get("comm_link") is not None:
        c = r.mapping(d["comm_link"], f"{where}.comm_link")
        link = CommLinkParams(
            kappa=r.number(c, "kappa", f"{where}.comm_link"),
            c_c=r.number(c, "c_c", f"{where}.comm_link"),
            c_pkt=r.number(c, "c_pkt", f"{where}.comm_link"),
        )
    return RoadSpec(
        name=r.text(d, "name", where),
        from_block=r.text(d, "from", where),
        to_block=r.text(d, "to", where),
        length=r.number(d, "length", where),
        capacity=r.number(d, "capacity", where),
        design_speed=r.number(d, "design_speed", where),
        alpha1=r.number(d, "alpha1", where),
        alpha2=r.number(d, "alpha2", where),
        alpha3=r.number(d, "alpha3", where),
        inflow=r.series(d.get("inflow"), f"{where}.inflow", grid),
        comm_link=link,
    )


def parse_scenario(text: str, base_dir: Path | None = None, dt: float | None = None) -> ScenarioConfig:
    """Parse scenario text; ``dt`` overrides the step declared in the file."""
    try:
        raw = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"malformed scenario: {exc}") from None
    if not isinstance(raw, Mapping):
        raise ScenarioParseError("scenario must be a mapping at top level")

    r = _Reader(base_dir)
    sim = r.mapping(raw.get("simulation"), "simulation")
    start = r.number(sim, "start", "simulation", 0.0)
    end = r.number(sim, "end", "simulation", 86400.0)
    step = r.number(sim, "dt", "simulation", 60.0) if dt is None else float(dt)
    tol = r.number(sim, "coupling_tolerance", "simulation", 1e-8)
    iters = r.integer(sim, "coupling_max_iters", "simulation", 50)

    grid_ok = step == step and step > 0 and end == end and start == start and end >= start
    if not grid_ok:
        if not (step > 0):
            r.fail("simulation.dt", f"must be > 0, got {step:g}")
        if not (end > start):
            r.fail("simulation.end", "must be after simulation.start")
        raise ValidationError(r.problems)
    grid = (start, end, step)

    gdef = r.mapping(raw.get("grid"), "grid")
    w = r.mapping(raw.get("weather"), "weather")
    weather = WeatherSeries(
        dni=r.series(w.get("dni"), "weather.dni", grid),
        sky_diffuse=r.series(w.get("sky_diffuse"), "weather.sky_diffuse", grid),
        ground_diffuse=r.series(w.get("ground_diffuse"), "weather.ground_diffuse", grid),
        cos_theta=r.series(w.get("cos_theta"), "weather.cos_theta", grid),
        wind_speed=r.series(w.get("wind_speed"), "weather.wind_speed", grid),
    )
    blocks = tuple(
        _block(r, b, f"blocks[{i}]", grid) for i, b in enumerate(r.seq(raw.get("blocks"), "blocks"))
    )
    roads = tuple(_road(r, b, f"roads[{i}]", grid) for i, b in enumerate(r.seq(raw.get("roads"), "roads")))
    clines = []
    for i, ln in enumerate(r.seq(raw.get("community_lines"), "community_lines")):
        wl = f"community_lines[{i}]"
        ln = r.mapping(ln, wl)
        clines.append(
            InterBlockLineSpec(
                name=r.text(ln, "name", wl, f"c{i + 1}"),
                from_node=r.text(ln, "from", wl),
                to_node=r.text(ln, "to", wl),
                r=r.number(ln, "r", wl),
                x=r.number(ln, "x", wl, 0.0),
                p_max=r.number(ln, "p_max", wl, math.inf),
            )
        )
    windows = []
    for i, win in enumerate(r.seq(raw.get("peak_windows"), "peak_windows")):
        if not isinstance(win, (list, tuple)) or len(win) != 2:
            r.fail(f"peak_windows[{i}]", "expected [start_s, end_s]")
            continue
        windows.append((float(win[0]), float(win[1])))
    sig = r.mapping(raw.get("signals"), "signals")

    if r.problems:
        raise ValidationError(r.problems)
    cfg = ScenarioConfig(
        name=str(raw.get("name", "scenario")),
        blocks=blocks,
        roads=roads,
        community_lines=tuple(clines),
        weather=weather,
        sim_start=start,
        sim_end=end,
        dt=step,
        coupling_tolerance=tol,
        coupling_max_iters=iters,
        grid_bus=r.text(gdef, "bus", "grid", GRID_NODE_DEFAULT),
        grid_voltage=r.number(gdef, "voltage", "grid", 12470.0),
        peak_windows=tuple(windows),
        lmp=r.number(sig, "lmp", "signals", 0.0),
        sig_e=r.number(sig, "sig_e", "signals", 0.0),
    )
    validate(cfg)
    return cfg


def load_scenario(path: str | Path, dt: float | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ScenarioParseError(f"scenario file not found: {path}") from None
    return parse_scenario(text, base_dir=path.parent, dt=dt)


def bundled_scenario(name: str) -> Path:
    """Path of a scenario shipped with the package (``case1.scn`` ...)."""
    return Path(__file__).parent / "data" / name


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def _in_unit(x: float) -> bool:
    return 0.0 <= x <= 1.0


def _is_tree(nodes: Iterable[str], edges: list[tuple[str, str]], root: str) -> str | None:
    """Return a problem description, or None when ``edges`` form a tree on ``nodes``."""
    nodes = list(nodes)
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    if len(edges) != len(nodes) - 1:
        return f"expected {len(nodes) - 1} lines for {len(nodes)} nodes, got {len(edges)}"
    seen = {root}
    stack = [root]
    while stack:
        n = stack.pop()
        for m in adj[n]:
            if m not in seen:
                seen.add(m)
                stack.append(m)
    missing = sorted(set(nodes) - seen)
    if missing:
        return f"nodes not reachable from {root!r}: {', '.join(missing)}"
    return None


def validate(cfg: ScenarioConfig) -> None:
    """Check every invariant of the configuration; raise :class:`ValidationError`."""
    p: list[tuple[str, str]] = []

    if not cfg.dt > 0:
        p.append(("simulation.dt", f"must be > 0, got {cfg.dt:g}"))
    if not cfg.sim_end > cfg.sim_start:
        p.append(("simulation.end", "must be after simulation.start"))
    if not cfg.coupling_tolerance > 0:
        p.append(("simulation.coupling_tolerance", "must be > 0"))
    if cfg.coupling_max_iters < 1:
        p.append(("simulation.coupling_max_iters", "must be >= 1"))
    if not cfg.grid_voltage > 0:
        p.append(("grid.voltage", "must be > 0"))

    w = cfg.weather
    for name in ("dni", "sky_diffuse", "ground_diffuse", "wind_speed"):
        if getattr(w, name).min() < 0:
            p.append((f"weather.{name}", "must be >= 0 at every sample"))
    if w.cos_theta.min() < -1 or w.cos_theta.max() > 1:
        p.append(("weather.cos_theta", "must lie in [-1, 1]"))

    names = [b.name for b in cfg.blocks]
    for n in sorted({n for n in names if names.count(n) > 1}):
        p.append(("blocks", f"duplicate block name {n!r}"))
    if cfg.grid_bus in names:
        p.append(("grid.bus", f"grid node name {cfg.grid_bus!r} clashes with a block"))

    for i, b in enumerate(cfg.blocks):
        wb = f"blocks[{i}]"
        if not b.name:
            p.append((f"{wb}.name", "must be non-empty"))
        if "." in b.name:
            p.append((f"{wb}.name", "must not contain '.'"))
        for j, a in enumerate(b.pv.arrays):
            wa = f"{wb}.pv" + (f"[{j}]" if len(b.pv.arrays) > 1 else "")
            if not a.area >= 0:
                p.append((f"{wa}.area", "must be >= 0"))
            for attr in ("f_act", "efficiency", "eta_dcac"):
                if not _in_unit(getattr(a, attr)):
                    p.append((f"{wa}.{attr}", "must lie in [0, 1]"))
        wd = b.wind
        if wd.count < 0:
            p.append((f"{wb}.wind.count", "must be >= 0"))
        if not _in_unit(wd.eta_dcac):
            p.append((f"{wb}.wind.eta_dcac", "must lie in [0, 1]"))
        if wd.scale < 0:
            p.append((f"{wb}.wind.scale", "must be >= 0"))
        speeds = [s for s, _ in wd.curve]
        if any(b2 <= a2 for a2, b2 in zip(speeds, speeds[1:])):
            p.append((f"{wb}.wind.curve", "speeds must be strictly increasing"))
        if any(pw < 0 or s < 0 for s, pw in wd.curve):
            p.append((f"{wb}.wind.curve", "speeds and powers must be >= 0"))
        if wd.count > 0 and not wd.curve:
            p.append((f"{wb}.wind.curve", "required when count > 0"))

        bt = b.battery
        if not bt.capacity_wh > 0:
            p.append((f"{wb}.battery.capacity_wh", "must be > 0"))
        if not bt.max_charge_w >= 0:
            p.append((f"{wb}.battery.max_charge_w", "must be >= 0"))
        if not bt.max_discharge_w >= 0:
            p.append((f"{wb}.battery.max_discharge_w", "must be >= 0"))
        if not _in_unit(bt.initial_soc):
            p.append((f"{wb}.battery.initial_soc", "must lie in [0, 1]"))
        if not bt.charge_threshold_w <= bt.discharge_threshold_w:
            p.append((f"{wb}.battery.charge_threshold_w", "must not exceed discharge_threshold_w"))
        if bt.charge_threshold_w < 0 or bt.discharge_threshold_w < 0:
            p.append((f"{wb}.battery", "thresholds must be >= 0"))

        if not b.initial_ev_count >= 0:
            p.append((f"{wb}.initial_ev_count", "must be >= 0"))
        if b.charge_probability.min() < 0 or b.charge_probability.max() > 1:
            p.append((f"{wb}.charge_probability", "must lie in [0, 1] at every sample"))
        if not b.ev_charge_power >= 0:
            p.append((f"{wb}.ev_charge_power", "must be >= 0"))
        if b.building_load.min() < 0:
            p.append((f"{wb}.building_load", "must be >= 0 at every sample"))
        for opt in ("general_load", "prescribed_ev_power", "prescribed_throughput"):
            s = getattr(b, opt)
            if s is not None and s.min() < 0:
                p.append((f"{wb}.{opt}", "must be >= 0 at every sample"))

        c = b.comm
        if c.count < 0:
            p.append((f"{wb}.comm.count", "must be >= 0"))
        for attr in ("e_elec", "eps_elec", "distance", "alpha"):
            if getattr(c, attr) < 0:
                p.append((f"{wb}.comm.{attr}", "must be >= 0"))

        p.extend(_feeder_problems(b.feeder, f"{wb}.feeder"))

    for i, rd in enumerate(cfg.roads):
        wr = f"roads[{i}]"
        for end_attr, key in (("from_block", "from"), ("to_block", "to")):
            ref = getattr(rd, end_attr)
            if ref not in names:
                p.append((f"{wr}.{key}", f"unknown block {ref!r}"))
        if not rd.length > 0:
            p.append((f"{wr}.length", "must be > 0"))
        if not rd.capacity > 0:
            p.append((f"{wr}.capacity", "must be > 0"))
        if not rd.design_speed > 0:
            p.append((f"{wr}.design_speed", "must be > 0"))
        if not rd.alpha1 > 0:
            p.append((f"{wr}.alpha1", "must be > 0"))
        if rd.inflow.min() < 0:
            p.append((f"{wr}.inflow", "must be >= 0 at every sample"))
        if rd.comm_link is not None:
            for attr in ("kappa", "c_c", "c_pkt"):
                if not getattr(rd.comm_link, attr) >= 0:
                    p.append((f"{wr}.comm_link.{attr}", "must be >= 0"))
    rnames = [rd.name for rd in cfg.roads]
    for n in sorted({n for n in rnames if rnames.count(n) > 1}):
        p.append(("roads", f"duplicate road name {n!r}"))

    p.extend(_community_problems(cfg))
    for i, (a, b) in enumerate(cfg.peak_windows):
        if not b > a:
            p.append((f"peak_windows[{i}]", "end must be after start"))

    if p:
        raise ValidationError(p)


def _feeder_problems(f: FeederSpec, where: str) -> list[tuple[str, str]]:
    p = []
    ids = [b.id for b in f.buses]
    if not ids:
        return [(f"{where}.buses", "feeder needs at least one bus")]
    for n in sorted({n for n in ids if ids.count(n) > 1}):
        p.append((f"{where}.buses", f"duplicate bus id {n!r}"))
    if f.root not in ids:
        p.append((f"{where}.root", f"unknown bus {f.root!r}"))
    edges = []
    for i, ln in enumerate(f.lines):
        wl = f"{where}.lines[{i}]"
        for attr, key in (("from_bus", "from"), ("to_bus", "to")):
            if getattr(ln, attr) not in ids:
                p.append((f"{wl}.{key}", f"unknown bus {getattr(ln, attr)!r}"))
        if not ln.r >= 0:
            p.append((f"{wl}.r", "resistance must be >= 0"))
        if not ln.p_max > 0:
            p.append((f"{wl}.p_max", "power limit must be > 0"))
        edges.append((ln.from_bus, ln.to_bus))
    if not p:
        problem = _is_tree(set(ids), edges, f.root)
        if problem:
            p.append((f"{where}.lines", f"feeder is not radial: {problem}"))
    totals: dict[str, float] = {}
    for i, b in enumerate(f.buses):
        for kind, frac in b.attach:
            if kind not in ATTACH_KINDS:
                p.append((f"{where}.buses[{i}].attach.{kind}", f"unknown attachment kind; use {ATTACH_KINDS}"))
            elif not _in_unit(frac):
                p.append((f"{where}.buses[{i}].attach.{kind}", "fraction must lie in [0, 1]"))
            totals[kind] = totals.get(kind, 0.0) + frac
    for kind, tot in sorted(totals.items()):
        if kind in ATTACH_KINDS and abs(tot - 1.0) > 1e-9:
            p.append((f"{where}.buses", f"{kind} fractions sum to {tot:g}, expected 1"))
    return p


def resolve_node(cfg: ScenarioConfig, ref: str) -> str | None:
    """Map a community-line endpoint to a global bus id, or None if unknown."""
    if ref == cfg.grid_bus:
        return ref
    block, _, bus = ref.partition(".")
    for b in cfg.blocks:
        if b.name == block:
            bus = bus or b.feeder.root
            if any(x.id == bus for x in b.feeder.buses):
                return f"{block}.{bus}"
            return None
    return None


def _community_problems(cfg: ScenarioConfig) -> list[tuple[str, str]]:
    p = []
    edges = []
    for i, ln in enumerate(cfg.community_lines):
        wl = f"community_lines[{i}]"
        ends = []
        for attr, key in (("from_node", "from"), ("to_node", "to")):
            ref = getattr(ln, attr)
            node = resolve_node(cfg, ref)
            if node is None:
                p.append((f"{wl}.{key}", f"unknown node {ref!r}"))
            ends.append(node.split(".")[0] if node else None)
        if not ln.r >= 0:
            p.append((f"{wl}.r", "resistance must be >= 0"))
        if not ln.p_max > 0:
            p.append((f"{wl}.p_max", "power limit must be > 0"))
        if None not in ends:
            edges.append((ends[0], ends[1]))
    if not p and cfg.blocks:
        names = {b.name for b in cfg.blocks}
        if len(names) == len(cfg.blocks):
            problem = _is_tree(names | {cfg.grid_bus}, edges, cfg.grid_bus)
            if problem:
                p.append(("community_lines", f"blocks must hang radially off the grid: {problem}"))
    return p


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _series_out(s: TimeSeriesProfile | None):
    if s is None:
        return None
    return {
        "interpolation": s.interpolation,
        "samples": [[t, v] for t, v in zip(s.times, s.values)],
    }


def to_dict(cfg: ScenarioConfig) -> dict:
    """Plain-data form of ``cfg`` with every series written inline."""

    def block(b: BlockSpec) -> dict:
        d = {
            "name": b.name,
            "pv": [
                {"area": a.area, "f_act": a.f_act, "efficiency": a.efficiency, "eta_dcac": a.eta_dcac}
                for a in b.pv.arrays
            ],
            "wind": {
                "count": b.wind.count,
                "curve": [[s, pw] for s, pw in b.wind.curve],
                "scale": b.wind.scale,
                "eta_dcac": b.wind.eta_dcac,
            },
            "battery": {
                "capacity_wh": b.battery.capacity_wh,
                "max_charge_w": b.battery.max_charge_w,
                "max_discharge_w": b.battery.max_discharge_w,
                "charge_threshold_w": b.battery.charge_threshold_w,
                "discharge_threshold_w": b.battery.discharge_threshold_w,
                "initial_soc": b.battery.initial_soc,
            },
            "feeder": {
                "root": b.feeder.root,
                "buses": [{"id": x.id, "attach": dict(x.attach)} for x in b.feeder.buses],
                "lines": [
                    {"name": ln.name, "from": ln.from_bus, "to": ln.to_bus, "r": ln.r, "x": ln.x, "p_max": ln.p_max}
                    for ln in b.feeder.lines
                ],
            },
            "initial_ev_count": b.initial_ev_count,
            "charge_probability": _series_out(b.charge_probability),
            "ev_charge_power": b.ev_charge_power,
            "building_load": _series_out(b.building_load),
            "comm": {
                "count": b.comm.count,
                "e_elec": b.comm.e_elec,
                "eps_elec": b.comm.eps_elec,
                "distance": b.comm.distance,
                "alpha": b.comm.alpha,
            },
        }
        for opt in ("general_load", "prescribed_ev_power", "prescribed_throughput"):
            if getattr(b, opt) is not None:
                d[opt] = _series_out(getattr(b, opt))
        return d

    def road(rd: RoadSpec) -> dict:
        d = {
            "name": rd.name,
            "from": rd.from_block,
            "to": rd.to_block,
            "length": rd.length,
            "capacity": rd.capacity,
            "design_speed": rd.design_speed,
            "alpha1": rd.alpha1,
            "alpha2": rd.alpha2,
            "alpha3": rd.alpha3,
            "inflow": _series_out(rd.inflow),
        }
        if rd.comm_link is not None:
            d["comm_link"] = {"kappa": rd.comm_link.kappa, "c_c": rd.comm_link.c_c, "c_pkt": rd.comm_link.c_pkt}
        return d

    w = cfg.weather
    return {
        "name": cfg.name,
        "simulation": {
            "start": cfg.sim_start,
            "end": cfg.sim_end,
            "dt": cfg.dt,
            "coupling_tolerance": cfg.coupling_tolerance,
            "coupling_max_iters": cfg.coupling_max_iters,
        },
        "grid": {"bus": cfg.grid_bus, "voltage": cfg.grid_voltage},
        "signals": {"lmp": cfg.lmp, "sig_e": cfg.sig_e},
        "peak_windows": [[a, b] for a, b in cfg.peak_windows],
        "weather": {
            "dni": _series_out(w.dni),
            "sky_diffuse": _series_out(w.sky_diffuse),
            "ground_diffuse": _series_out(w.ground_diffuse),
            "cos_theta": _series_out(w.cos_theta),
            "wind_speed": _series_out(w.wind_speed),
        },
        "community_lines": [
            {"name": ln.name, "from": ln.from_node, "to": ln.to_node, "r": ln.r, "x": ln.x, "p_max": ln.p_max}
            for ln in cfg.community_lines
        ],
        "blocks": [block(b) for b in cfg.blocks],
        "roads": [road(rd) for rd in cfg.roads],
    }


def dump_scenario(cfg: ScenarioConfig) -> str:
    return yaml.dump(to_dict(cfg), Dumper=_Dumper, sort_keys=False, default_flow_style=None, width=1000)


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(dump_scenario(cfg), encoding="utf-8", newline="\n")
