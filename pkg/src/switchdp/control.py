"""Online mode selection, closed-loop rollouts and open-loop replay."""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import (
    ArgumentError,
    CostSpec,
    SimulationError,
    SimulationTrace,
    SwitchedSystem,
    as_state,
    build_trace,
    check_mode,
    running_cost,
)
from .valuestore import ValueTable


class StageError(ArgumentError):
    """No decision exists at the requested stage."""


@dataclass(frozen=True)
class UniformDisturbance:
    """Per-step additive offsets drawn uniformly from ``[low, high]`` per component.

    The stream depends only on ``seed``, so a closed-loop run and an open-loop
    replay built from the same instance see identical offsets.
    """

    low: float = 0.0
    high: float = 0.005
    seed: int = 0

    def __post_init__(self):
        if not self.low <= self.high:
            raise ArgumentError("disturbance low bound exceeds high bound")

    def offsets(self, horizon: int, state_dim: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return rng.uniform(self.low, self.high, size=(horizon, state_dim))


@dataclass(frozen=True)
class ControllerConfig:
    """``threshold = 0`` is the plain argmin rule.

    With ``threshold > 0`` the switching table is ignored and the controller
    keeps the active mode unless another one scores better by more than the
    threshold (the threshold-remedy baseline).
    """

    threshold: float = 0.0
    disturbance: Optional[UniformDisturbance] = None

    def __post_init__(self):
        if not self.threshold >= 0.0:
            raise ArgumentError("threshold must be non-negative")


def _scores(table: ValueTable, cost: CostSpec, system: SwitchedSystem, k: int, x: np.ndarray) -> np.ndarray:
    out = np.empty(system.mode_count)
    for i in range(1, system.mode_count + 1):
        nxt = system.apply(i, x)
        out[i - 1] = running_cost(cost, x, i) + float(table.basis.evaluate_batch(nxt) @ table.weights[k + 1, i - 1])
    return out


def _check_compatible(table: ValueTable, cost: CostSpec, system: SwitchedSystem):
    if table.mode_count != system.mode_count or cost.mode_count != system.mode_count:
        raise ArgumentError("table, cost and system disagree on the number of modes")
    if table.basis.input_dim != system.state_dim:
        raise ArgumentError("table basis dimension does not match the system state")
    if table.horizon != cost.horizon:
        raise ArgumentError(f"table horizon {table.horizon} != cost horizon {cost.horizon}")


def _decide(scores: np.ndarray, switch_row: np.ndarray, i_prev: int, threshold: float) -> int:
    if threshold > 0.0:
        best = int(np.argmin(scores))
        if scores[best] < scores[i_prev - 1] - threshold:
            return best + 1
        return i_prev
    return int(np.argmin(scores + switch_row)) + 1


def select_mode(table: ValueTable, cost: CostSpec, system: SwitchedSystem, k: int, x,
                i_prev: int, cfg: ControllerConfig = ControllerConfig()) -> int:
    """Mode to run from stage ``k`` to ``k+1``; ties go to the lowest index."""
    _check_compatible(table, cost, system)
    if not 0 <= k < cost.horizon:
        raise StageError(f"no decision at stage {k}; decisions exist for 0..{cost.horizon - 1}")
    i_prev = check_mode(i_prev, system.mode_count)
    state = as_state(x, system.state_dim)
    return _decide(_scores(table, cost, system, k, state), cost.switch_table[i_prev - 1],
                   i_prev, cfg.threshold)


def _rollout(system, cost, x0, i_init, horizon, choose, disturbance) -> SimulationTrace:
    i_init = check_mode(i_init, system.mode_count)
    state = as_state(x0, system.state_dim)
    if not system.in_domain(state):
        warnings.warn(f"initial state {state.tolist()} lies outside the training domain", stacklevel=3)
    offsets = None if disturbance is None else disturbance.offsets(horizon, system.state_dim)
    states = np.empty((horizon + 1, system.state_dim))
    states[0] = state
    modes = []
    prev = i_init
    for k in range(horizon):
        mode = choose(k, states[k], prev)
        nxt = system.apply(mode, states[k])
        if offsets is not None:
            nxt = nxt + offsets[k]
        if not np.all(np.isfinite(nxt)):
            raise SimulationError(f"non-finite state at step {k + 1}", step=k + 1)
        states[k + 1] = nxt
        modes.append(mode)
        prev = mode
    return build_trace(cost, states, modes, i_init, disturbances=offsets, system=system)


def simulate(table: ValueTable, cost: CostSpec, system: SwitchedSystem, x0, i_init: int,
             cfg: ControllerConfig = ControllerConfig()) -> SimulationTrace:
    """Closed-loop rollout over the full horizon, costed under ``cost``."""
    _check_compatible(table, cost, system)

    def choose(k, x, prev):
        return _decide(_scores(table, cost, system, k, x), cost.switch_table[prev - 1], prev, cfg.threshold)

    return _rollout(system, cost, x0, i_init, cost.horizon, choose, cfg.disturbance)


def replay_open_loop(cost: CostSpec, system: SwitchedSystem, x0, i_init: int,
                     modes: Sequence[int], cfg: ControllerConfig = ControllerConfig()) -> SimulationTrace:
    """Apply a fixed mode sequence regardless of the state."""
    if len(modes) != cost.horizon:
        raise ArgumentError(f"need {cost.horizon} modes, got {len(modes)}")
    fixed = [check_mode(m, system.mode_count) for m in modes]
    return _rollout(system, cost, x0, i_init, cost.horizon, lambda k, x, prev: fixed[k], cfg.disturbance)


def trace_rows(trace: SimulationTrace):
    """Rows of the trace CSV, header first.

    Columns: ``k, x_0 .. x_{n-1}, mode, stage_cost, switch_cost, out_of_domain``.
    Stage rows carry ``Q`` in ``stage_cost`` and ``kappa`` in
    ``switch_cost``; the final row (``k = N``) has an empty mode and the
    terminal cost in ``stage_cost``.
    """
    n = trace.states.shape[1]
    flags = trace.out_of_domain
    if flags is None:
        flags = np.zeros(trace.states.shape[0], dtype=bool)
    yield ["k"] + [f"x_{d}" for d in range(n)] + ["mode", "stage_cost", "switch_cost", "out_of_domain"]
    for k, mode in enumerate(trace.modes):
        yield ([k] + [repr(float(v)) for v in trace.states[k]]
               + [mode, repr(trace.stage_costs[k]), repr(trace.switch_costs[k]), int(flags[k])])
    last = trace.horizon
    yield ([last] + [repr(float(v)) for v in trace.states[last]]
           + ["", repr(trace.terminal_cost), "", int(flags[last])])


def write_trace_csv(trace: SimulationTrace, destination) -> None:
    with open(destination, "w", newline="", encoding="utf-8") as handle:
        csv.writer(handle).writerows(trace_rows(trace))


def trace_csv_text(trace: SimulationTrace) -> str:
    buf = io.StringIO()
    csv.writer(buf).writerows(trace_rows(trace))
    return buf.getvalue()


def summarize(trace: SimulationTrace, tracked_axis: Optional[int] = None, target: float = 0.0) -> dict:
    summary = {
        "total_cost": trace.total_cost,
        "switch_count": trace.switch_count,
        "switch_steps": trace.switch_steps,
        "final_state": trace.final_state.tolist(),
        "final_mode": trace.final_mode,
        "out_of_domain_steps": int(np.sum(trace.out_of_domain)) if trace.out_of_domain is not None else 0,
    }
    if tracked_axis is not None:
        summary["terminal_tracking_error"] = abs(float(trace.final_state[tracked_axis]) - target)
    return summary
