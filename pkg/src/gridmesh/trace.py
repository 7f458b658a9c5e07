"""Time-indexed record of every quantity published during a run."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

UNITS = {
    "grid_power": "W",
    "bus_voltage": "pu",
    "line_power": "W",
    "line_loss": "W",
    "soc": "1",
    "battery_power": "W",
    "p_pv": "W",
    "p_win": "W",
    "p_bui": "W",
    "p_gen": "W",
    "p_ev": "W",
    "p_com": "W",
    "tower_throughput": "packets/s",
    "n_parked": "vehicles",
    "n_char": "vehicles",
    "q_in": "vehicles/h",
    "q_out": "vehicles/h",
    "v_ave": "vehicles/h",
    "u_ave": "m/s",
    "t_travel": "s",
    "vehicles": "vehicles",
    "q_c": "packets/s",
    "gamma": "1",
    "delay_factor": "1",
    "coupling_iterations": "1",
    "coupling_residual": "1",
}

CSV_PREFIX = "trace_"


class TraceError(ValueError):
    pass


@dataclass
class TraceSet:
    """Per-step values of each quantity, one column per element.

    ``data[q]`` has shape ``(len(times), len(columns[q]))``.
    """

    times: np.ndarray
    columns: dict[str, tuple[str, ...]] = field(default_factory=dict)
    data: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise TraceError("timestamps must be strictly increasing")
        for q, arr in self.data.items():
            if arr.shape != (len(self.times), len(self.columns[q])):
                raise TraceError(f"{q}: shape {arr.shape} does not match times x columns")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def quantities(self) -> list[str]:
        return list(self.data)

    @property
    def dt(self) -> float | None:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else None

    def series(self, quantity: str, element: str) -> np.ndarray:
        cols = self._columns(quantity)
        if element not in cols:
            raise TraceError(f"{quantity} has no element {element!r}; available: {', '.join(cols)}")
        return self.data[quantity][:, cols.index(element)]

    def _columns(self, quantity: str) -> tuple[str, ...]:
        if quantity not in self.data:
            raise TraceError(f"unknown quantity {quantity!r}; available: {', '.join(self.data)}")
        return self.columns[quantity]

    def identical(self, other: "TraceSet") -> bool:
        """Bit-level equality of timestamps, layout and values."""
        if self.columns != other.columns or not np.array_equal(self.times, other.times):
            return False
        return all(
            self.data[q].tobytes() == other.data[q].tobytes() for q in self.data
        )

    @classmethod
    def from_records(cls, times, layout: dict[str, tuple[str, ...]], records: list[dict]) -> "TraceSet":
        data = {}
        for q, cols in layout.items():
            if records:
                data[q] = np.vstack([np.asarray(r[q], dtype=float) for r in records])
            else:
                data[q] = np.empty((0, len(cols)))
        return cls(np.asarray(times, dtype=float), dict(layout), data)

    # -- I/O -----------------------------------------------------------------

    def csv_text(self, quantity: str) -> str:
        cols = self._columns(quantity)
        buf = io.StringIO()
        buf.write(",".join(("time_s",) + cols) + "\n")
        arr = self.data[quantity]
        for k, t in enumerate(self.times):
            buf.write(",".join([repr(float(t))] + [repr(float(x)) for x in arr[k]]) + "\n")
        return buf.getvalue()

    def write_csv(self, directory: str | Path) -> list[Path]:
        directory = Path(directory)
        out = []
        for q in self.data:
            path = directory / f"{CSV_PREFIX}{q}.csv"
            path.write_text(self.csv_text(q), encoding="utf-8", newline="\n")
            out.append(path)
        return out

    def to_json(self) -> str:
        payload = {
            "time_s": self.times.tolist(),
            "quantities": {
                q: {
                    "unit": UNITS.get(q, ""),
                    "columns": list(self.columns[q]),
                    "values": self.data[q].tolist(),
                }
                for q in self.data
            },
        }
        return json.dumps(payload, allow_nan=True)

    @classmethod
    def read_csv(cls, directory: str | Path, quantities=None) -> "TraceSet":
        directory = Path(directory)
        if not directory.is_dir():
            raise TraceError(f"not a trace directory: {directory}")
        files = sorted(directory.glob(f"{CSV_PREFIX}*.csv"))
        wanted = None if quantities is None else set(quantities)
        times = None
        columns, data = {}, {}
        for path in files:
            q = path.stem[len(CSV_PREFIX):]
            if wanted is not None and q not in wanted:
                continue
            rows = list(csv.reader(io.StringIO(path.read_text(encoding="utf-8"))))
            if not rows or rows[0][0] != "time_s":
                raise TraceError(f"{path}: missing time_s header")
            body = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
            body = body.reshape(-1, len(rows[0]))
            t = body[:, 0]
            if times is None:
                times = t
            elif not np.array_equal(times, t):
                raise TraceError(f"{path}: timestamps differ from other quantities")
            columns[q] = tuple(rows[0][1:])
            data[q] = body[:, 1:]
        if wanted is not None:
            missing = sorted(wanted - set(data))
            if missing:
                raise TraceError(f"quantity not found in {directory}: {', '.join(missing)}")
        if times is None:
            times = np.empty(0)
        return cls(times, columns, data)
