"""Experiment harness: symbol expressions, configuration, experiments, reports and CLI."""

from .config import (
    COMMAND_DEFAULTS,
    ConfigError,
    ExperimentConfig,
    ExponentTuple,
    GateResult,
    build_symbol,
    exponent_gate,
    resolve_config,
)
from .experiments import *  # noqa: F401,F403
from .parser import *  # noqa: F401,F403
from .report import write_report

__all__ = [
    "COMMAND_DEFAULTS",
    "ConfigError",
    "ExperimentConfig",
    "ExponentTuple",
    "GateResult",
    "build_symbol",
    "exponent_gate",
    "resolve_config",
    "write_report",
]
