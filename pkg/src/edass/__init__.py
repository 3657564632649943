"""Discrete-event simulator of a duty-cycled sensor network that detects,
tracks and raises alerts on targets carrying explosive material."""

from .scenario import Scenario, load_default, load_scenario, parse_scenario, serialize_scenario
from .simulation import RunResult, run_scenario

__all__ = [
    "Scenario",
    "RunResult",
    "load_default",
    "load_scenario",
    "parse_scenario",
    "run_scenario",
    "serialize_scenario",
]

__version__ = "0.1.0"
