"""Approximate dynamic programming for finite-horizon optimal mode scheduling
of switched systems with switching costs."""

from .basis import BasisSet, evaluate, parse_descriptor, total_degree_monomials, univariate_powers
from .control import ControllerConfig, UniformDisturbance, replay_open_loop, select_mode, simulate
from .model import (
    ArgumentError,
    CostSpec,
    SimulationTrace,
    SwitchDPError,
    SwitchedSystem,
    step,
    trace_cost,
    uniform_switch_table,
)
from .oracle import BudgetError, enumerate_optimal, sequence_cost
from .training import TrainingConfig, batch_train, sequential_train, train
from .valuestore import ValueTable, load, save, value

__version__ = "0.1.0"

__all__ = [
    "ArgumentError", "BasisSet", "BudgetError", "ControllerConfig", "CostSpec",
    "SimulationTrace", "SwitchDPError", "SwitchedSystem", "TrainingConfig",
    "UniformDisturbance", "ValueTable", "batch_train", "enumerate_optimal", "evaluate",
    "load", "parse_descriptor", "replay_open_loop", "save", "select_mode",
    "sequence_cost", "sequential_train", "simulate", "step", "total_degree_monomials",
    "trace_cost", "train", "uniform_switch_table", "univariate_powers", "value",
]
