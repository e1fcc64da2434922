"""Discrete-time microgrid simulator with an EV fleet under fractional-order PID frequency control."""

from .config import ConfigError, RunConfig, parse_config
from .scenarios import (CaseId, RunSummary, ScenarioId, ScenarioSpec, build_microgrid,
                        build_scenario, run_batch, run_scenario, summarize)
from .simcore import (MicrogridState, SimConfig, SimTrace, SimulationFault, Simulator, simulate,
                      swing_step)

__all__ = [
    "CaseId", "ConfigError", "MicrogridState", "RunConfig", "RunSummary", "ScenarioId",
    "ScenarioSpec", "SimConfig", "SimTrace", "SimulationFault", "Simulator", "build_microgrid",
    "build_scenario", "parse_config", "run_batch", "run_scenario", "simulate", "summarize",
    "swing_step",
]
