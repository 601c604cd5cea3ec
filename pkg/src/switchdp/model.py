"""Switched-system problem definition.

A switched system has ``M`` autonomous discrete-time modes ``x' = f_i(x)``
acting on an ``n``-dimensional state. A schedule ``i_0 .. i_{N-1}`` is scored
by

    J = psi(x_N, i_{N-1}) + sum_k [ Q(x_k, i_k) + kappa(i_{k-1}, i_k) ]

where ``i_{-1}`` is the mode that was already active before ``k = 0``.

Mode indices are 1-based everywhere a caller can see them.

Callables (mode maps, ``psi`` and ``Q``) must broadcast over leading axes:
a map receives an array of shape ``(..., n)`` and returns the same shape,
a cost receives ``(..., n)`` plus a mode index and returns shape ``(...)``.
Training and the oracle rely on this to evaluate whole sample batches at once.

Convexity of ``psi(., i)`` and ``Q(., i)`` is a caller obligation and is not
checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

ModeMap = Callable[[np.ndarray], np.ndarray]
StateCost = Callable[[np.ndarray, int], "np.ndarray | float"]


class SwitchDPError(Exception):
    """Base class for all library errors."""


class ArgumentError(SwitchDPError, ValueError):
    """Invalid argument: bad mode index, wrong shape, non-finite state."""


class SimulationError(SwitchDPError):
    """A rollout produced a non-finite state."""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step


def check_mode(mode: int, mode_count: int) -> int:
    """Validate a 1-based mode index and return it as a plain int."""
    if isinstance(mode, (bool, np.bool_)) or not isinstance(mode, (int, np.integer)):
        raise ArgumentError(f"mode index must be an integer, got {mode!r}")
    mode = int(mode)
    if not 1 <= mode <= mode_count:
        raise ArgumentError(f"mode index {mode} outside 1..{mode_count}")
    return mode


def as_state(x, state_dim: int) -> np.ndarray:
    """Coerce ``x`` to a finite float vector of length ``state_dim``."""
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.shape != (state_dim,):
        raise ArgumentError(f"state must have {state_dim} components, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ArgumentError(f"state must be finite, got {arr.tolist()}")
    return arr


@dataclass(frozen=True)
class SwitchedSystem:
    """``M`` deterministic discrete-time mode maps on R^n plus the box ``Omega``.

    ``domain_lower``/``domain_upper`` bound the domain of interest used for
    training samples. Simulated states may leave it; they are only flagged.
    """

    state_dim: int
    mode_maps: tuple
    domain_lower: np.ndarray
    domain_upper: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        if int(self.state_dim) < 1:
            raise ArgumentError("state_dim must be positive")
        maps = tuple(self.mode_maps)
        if not maps:
            raise ArgumentError("at least one mode map is required")
        lo = np.array(self.domain_lower, dtype=float).reshape(-1)
        hi = np.array(self.domain_upper, dtype=float).reshape(-1)
        if lo.shape != (self.state_dim,) or hi.shape != (self.state_dim,):
            raise ArgumentError("domain bounds must have state_dim entries")
        if not np.all(lo < hi):
            raise ArgumentError("domain lower bound must be below upper bound on every axis")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "state_dim", int(self.state_dim))
        object.__setattr__(self, "mode_maps", maps)
        object.__setattr__(self, "domain_lower", lo)
        object.__setattr__(self, "domain_upper", hi)

    @property
    def mode_count(self) -> int:
        return len(self.mode_maps)

    def in_domain(self, x: np.ndarray) -> np.ndarray:
        """Boolean membership in the closed box, broadcast over leading axes."""
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.domain_lower) & (x <= self.domain_upper), axis=-1)

    def apply(self, mode: int, x: np.ndarray) -> np.ndarray:
        """Batched ``f_mode`` without argument checks (internal fast path)."""
        return np.asarray(self.mode_maps[mode - 1](x), dtype=float)


def step(system: SwitchedSystem, mode: int, x) -> np.ndarray:
    """Return ``f_mode(x)`` for a single state. Inputs are never mutated."""
    mode = check_mode(mode, system.mode_count)
    state = as_state(x, system.state_dim)
    out = np.array(system.mode_maps[mode - 1](state.copy()), dtype=float).reshape(-1)
    if out.shape != (system.state_dim,):
        raise ArgumentError(f"mode {mode} map returned shape {out.shape}")
    return out


@dataclass(frozen=True)
class CostSpec:
    """Terminal cost ``psi``, running cost ``Q``, switching table and horizon.

    ``switch_table[a-1, b-1]`` is the cost of switching from mode ``a`` to
    mode ``b``. Its diagonal must be exactly zero; off-diagonal entries may
    be negative (rewards).
    """

    terminal: StateCost
    running: StateCost
    switch_table: np.ndarray
    horizon: int

    def __post_init__(self):
        table = np.array(self.switch_table, dtype=float)
        if table.ndim != 2 or table.shape[0] != table.shape[1] or table.shape[0] < 1:
            raise ArgumentError("switch_table must be a square M x M table")
        if not np.all(np.isfinite(table)):
            raise ArgumentError("switch_table entries must be finite")
        if np.any(np.diag(table) != 0.0):
            raise ArgumentError("switch_table diagonal must be exactly zero")
        if isinstance(self.horizon, bool) or int(self.horizon) != self.horizon or self.horizon < 0:
            raise ArgumentError("horizon must be a non-negative integer")
        table.setflags(write=False)
        object.__setattr__(self, "switch_table", table)
        object.__setattr__(self, "horizon", int(self.horizon))

    @property
    def mode_count(self) -> int:
        return self.switch_table.shape[0]

    def with_horizon(self, horizon: int) -> "CostSpec":
        return CostSpec(self.terminal, self.running, self.switch_table, horizon)

    def with_switch_table(self, table) -> "CostSpec":
        return CostSpec(self.terminal, self.running, table, self.horizon)


def uniform_switch_table(mode_count: int, kappa0: float) -> np.ndarray:
    """Table with ``kappa0`` off the diagonal and zeros on it."""
    table = np.full((mode_count, mode_count), float(kappa0))
    np.fill_diagonal(table, 0.0)
    return table


def switching_cost(cost: CostSpec, from_mode: int, to_mode: int) -> float:
    a = check_mode(from_mode, cost.mode_count)
    b = check_mode(to_mode, cost.mode_count)
    return float(cost.switch_table[a - 1, b - 1])


def _scalar(value) -> float:
    return float(np.asarray(value, dtype=float).reshape(()))


def running_cost(cost: CostSpec, x: np.ndarray, mode: int) -> float:
    return _scalar(cost.running(x, mode))


def terminal_cost(cost: CostSpec, x: np.ndarray, mode: int) -> float:
    return _scalar(cost.terminal(x, mode))


def total_of(terminal: float, stage_costs: Sequence[float], switch_costs: Sequence[float]) -> float:
    """Canonical summation order shared by traces, replays and the oracle."""
    return terminal + math.fsum(stage_costs) + math.fsum(switch_costs)


@dataclass
class SimulationTrace:
    """Per-step record of one rollout over ``N`` stages.

    ``disturbances[k]`` is the offset added after the ``k``-th mode step, so
    ``states[k+1] = f_{modes[k]}(states[k]) + disturbances[k]``.
    ``out_of_domain[k]`` flags ``states[k]`` outside ``Omega``.
    """

    states: np.ndarray
    modes: list
    initial_mode: int
    stage_costs: list
    switch_costs: list
    terminal_cost: float
    total_cost: float
    disturbances: Optional[np.ndarray] = None
    out_of_domain: Optional[np.ndarray] = field(default=None)

    @property
    def horizon(self) -> int:
        return len(self.modes)

    @property
    def switch_steps(self) -> list:
        """Stages ``k`` at which ``modes[k]`` differs from the previous active mode."""
        prev = self.initial_mode
        steps = []
        for k, mode in enumerate(self.modes):
            if mode != prev:
                steps.append(k)
            prev = mode
        return steps

    @property
    def switch_count(self) -> int:
        return len(self.switch_steps)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_mode(self) -> int:
        return self.modes[-1] if self.modes else self.initial_mode


def build_trace(cost: CostSpec, states, modes, initial_mode: int,
                disturbances=None, system: Optional[SwitchedSystem] = None) -> SimulationTrace:
    """Assemble a trace from raw states and modes, charging every cost term."""
    states = np.array(states, dtype=float)
    if states.ndim == 1:
        states = states.reshape(-1, 1)
    modes = [check_mode(m, cost.mode_count) for m in modes]
    initial_mode = check_mode(initial_mode, cost.mode_count)
    if states.shape[0] != len(modes) + 1:
        raise ArgumentError(
            f"need len(modes)+1 = {len(modes) + 1} states, got {states.shape[0]}")
    stage_costs, switch_costs = [], []
    prev = initial_mode
    for k, mode in enumerate(modes):
        stage_costs.append(running_cost(cost, states[k], mode))
        switch_costs.append(float(cost.switch_table[prev - 1, mode - 1]))
        prev = mode
    final = terminal_cost(cost, states[-1], prev)
    flags = system.in_domain(states) if system is not None else None
    return SimulationTrace(
        states=states,
        modes=modes,
        initial_mode=initial_mode,
        stage_costs=stage_costs,
        switch_costs=switch_costs,
        terminal_cost=final,
        total_cost=total_of(final, stage_costs, switch_costs),
        disturbances=None if disturbances is None else np.array(disturbances, dtype=float),
        out_of_domain=None if flags is None else ~np.asarray(flags, dtype=bool),
    )


def trace_cost(cost: CostSpec, trace: SimulationTrace) -> float:
    """Recompute ``J`` for ``trace`` from its raw states and modes under ``cost``.

    ``cost`` need not be the cost the trace was produced with, which is how a
    rollout is scored under a different switching table.
    """
    n_modes = len(trace.modes)
    states = np.asarray(trace.states, dtype=float)
    if n_modes != cost.horizon:
        raise ArgumentError(f"trace has {n_modes} stages, cost horizon is {cost.horizon}")
    if states.shape[0] != n_modes + 1:
        raise ArgumentError(f"trace has {states.shape[0]} states for {n_modes} stages")
    prev = check_mode(trace.initial_mode, cost.mode_count)
    stage, switch = [], []
    for k in range(n_modes):
        mode = check_mode(trace.modes[k], cost.mode_count)
        stage.append(running_cost(cost, states[k], mode))
        switch.append(float(cost.switch_table[prev - 1, mode - 1]))
        prev = mode
    return total_of(terminal_cost(cost, states[-1], prev), stage, switch)
