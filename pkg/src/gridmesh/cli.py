"""Command-line entry point.

    gridmesh run --scenario case3.scn --mode etc --out out/etc
    gridmesh compare out/et out/etc --quantity u_ave
    gridmesh plotdata out/etc --quantity u_ave --elements road3,road6

Scenario paths that do not exist are looked up among the bundled
scenarios.  ``GRIDMESH_LOG`` sets the log level (default WARNING).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .engine import CouplingMode, SimulationError, compare, run
from .indicators import evaluate
from .scenario import ScenarioError, bundled_scenario, dump_scenario, load_scenario
from .trace import TraceError, TraceSet

log = logging.getLogger("gridmesh")

FORMATS = ("csv", "json")


class CliError(Exception):
    pass


@dataclass(frozen=True)
class RunRequest:
    scenario: Path
    mode: CouplingMode
    out: Path
    dt: float | None = None
    formats: frozenset = frozenset({"csv"})


def resolve_scenario(ref: str | Path) -> Path:
    p = Path(ref)
    if p.exists():
        return p
    bundled = bundled_scenario(p.name)
    if bundled.exists():
        return bundled
    raise CliError(f"scenario not found: {ref}")


def _parse_formats(text: str) -> frozenset:
    fmts = frozenset(f.strip().lower() for f in text.split(",") if f.strip())
    bad = sorted(fmts - set(FORMATS))
    if bad or not fmts:
        raise argparse.ArgumentTypeError(f"formats must be a comma list of {', '.join(FORMATS)}")
    return fmts


def _publish(tmp: Path, out: Path) -> None:
    """Move a finished output directory into place."""
    if not out.exists():
        os.replace(tmp, out)
        return
    if not out.is_dir():
        raise CliError(f"output path exists and is not a directory: {out}")
    for f in sorted(tmp.iterdir()):
        os.replace(f, out / f.name)
    tmp.rmdir()


def cmd_run(req: RunRequest) -> int:
    cfg = load_scenario(req.scenario, dt=req.dt)
    trace = run(cfg, req.mode)
    report = evaluate(trace, cfg)

    req.out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{req.out.name}.", dir=req.out.parent))
    try:
        if "csv" in req.formats:
            trace.write_csv(tmp)
        if "json" in req.formats:
            (tmp / "trace.json").write_text(trace.to_json() + "\n", encoding="utf-8", newline="\n")
        (tmp / "indicators.json").write_text(report.to_json(), encoding="utf-8", newline="\n")
        manifest = {
            "tool": "gridmesh",
            "version": __version__,
            "scenario": str(req.scenario),
            "scenario_sha256": hashlib.sha256(dump_scenario(cfg).encode("utf-8")).hexdigest(),
            "mode": req.mode.value,
            "dt": cfg.dt,
            "sim_start": cfg.sim_start,
            "sim_end": cfg.sim_end,
            "steps": len(trace),
            "formats": sorted(req.formats),
        }
        (tmp / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8", newline="\n")
        _publish(tmp, req.out)
    finally:
        if tmp.exists():
            shutil.rmtree(tmp)
    print(f"{cfg.name}: {len(trace)} steps in mode {req.mode.value} -> {req.out}")
    print(report.table(), end="")
    return 0


def cmd_compare(dir_a: Path, dir_b: Path, quantity: str, out: Path | None = None) -> int:
    a = TraceSet.read_csv(dir_a, [quantity])
    b = TraceSet.read_csv(dir_b, [quantity])
    rep = compare(a, b, quantity)
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        tmp = out.with_name(f".{out.name}.tmp")
        tmp.write_text(rep.csv_text(), encoding="utf-8", newline="\n")
        os.replace(tmp, out)
    if rep.peak_time is None:
        print(f"{quantity}: empty traces")
        return 0
    print(
        f"{quantity}: peak deviation {100 * rep.peak:.4g}% at t={rep.peak_time:g} s "
        f"({rep.peak_element}); mean {100 * rep.mean:.4g}%"
    )
    for name in rep.columns:
        s = rep.element(name)
        print(f"  {name}: peak {100 * s['peak']:.4g}% at t={s['peak_time']:g} s, mean {100 * s['mean']:.4g}%")
    return 0


def plotdata_text(trace: TraceSet, quantity: str, elements=None) -> str:
    cols = trace.columns[quantity] if quantity in trace.columns else ()
    if quantity not in trace.data:
        raise TraceError(f"unknown quantity {quantity!r}")
    wanted = list(elements) if elements else list(cols)
    for e in wanted:
        if e not in cols:
            raise TraceError(f"{quantity} has no element {e!r}; available: {', '.join(cols)}")
    idx = [cols.index(e) for e in wanted]
    arr = trace.data[quantity]
    lines = ["time_s,element,value"]
    for k, t in enumerate(trace.times):
        for e, j in zip(wanted, idx):
            lines.append(f"{float(t)!r},{e},{float(arr[k, j])!r}")
    return "\n".join(lines) + "\n"


def cmd_plotdata(trace_dir: Path, quantity: str, elements=None, out: Path | None = None) -> int:
    trace = TraceSet.read_csv(trace_dir, [quantity])
    text = plotdata_text(trace, quantity, elements)
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8", newline="\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gridmesh", description="Community infrastructure co-simulation")
    ap.add_argument("--version", action="version", version=f"gridmesh {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario and write traces")
    p.add_argument("--scenario", required=True, help="scenario file or bundled name (case1.scn ...)")
    p.add_argument("--mode", required=True, choices=[m.value for m in CouplingMode])
    p.add_argument("--dt", type=float, default=None, help="override the step size (s)")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--format", dest="formats", type=_parse_formats, default=frozenset({"csv"}))

    p = sub.add_parser("compare", help="relative deviation of one quantity between two runs")
    p.add_argument("dir_a", type=Path)
    p.add_argument("dir_b", type=Path)
    p.add_argument("--quantity", required=True)
    p.add_argument("--out", type=Path, default=None, help="write the per-step deviation CSV here")

    p = sub.add_parser("plotdata", help="long-format CSV (time, element, value) of one quantity")
    p.add_argument("trace_dir", type=Path)
    p.add_argument("--quantity", required=True)
    p.add_argument("--elements", default="", help="comma-separated element names (default: all)")
    p.add_argument("--out", type=Path, default=None)
    return ap


def _configure_logging() -> None:
    level = os.environ.get("GRIDMESH_LOG", "WARNING").strip()
    value = int(level) if level.isdigit() else logging.getLevelName(level.upper())
    if not isinstance(value, int):
        value = logging.WARNING
    logging.basicConfig(level=value, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            req = RunRequest(
                resolve_scenario(args.scenario), CouplingMode.parse(args.mode), args.out, args.dt, args.formats
            )
            return cmd_run(req)
        if args.command == "compare":
            return cmd_compare(args.dir_a, args.dir_b, args.quantity, args.out)
        elements = [e.strip() for e in args.elements.split(",") if e.strip()]
        return cmd_plotdata(args.trace_dir, args.quantity, elements, args.out)
    except (CliError, ScenarioError, SimulationError, TraceError, OSError) as exc:
        print(f"gridmesh: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
