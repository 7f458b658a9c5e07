"""Quasi-static co-simulation of energy, transportation and communication
infrastructure in a connected community."""

__version__ = "0.1.0"

from .engine import CouplingMode, DeviationReport, compare, run  # noqa: E402
from .indicators import IndicatorReport, evaluate  # noqa: E402
from .scenario import ScenarioConfig, bundled_scenario, load_scenario, parse_scenario  # noqa: E402
from .trace import TraceSet  # noqa: E402

__all__ = [
    "CouplingMode",
    "DeviationReport",
    "IndicatorReport",
    "ScenarioConfig",
    "TraceSet",
    "bundled_scenario",
    "compare",
    "evaluate",
    "load_scenario",
    "parse_scenario",
    "run",
]
