"""Exact small-horizon ground truth by exhaustive enumeration of mode sequences.

Enumeration proceeds level by level: all ``M^d`` prefixes of length ``d`` are
held as one array of states and accumulated costs, and extended by every
mode at once. Each prefix is therefore propagated exactly once. Prefix order
is lexicographic, so ``argmin`` picks the lexicographically smallest sequence
among exact ties.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .control import replay_open_loop
from .model import (
    ArgumentError,
    CostSpec,
    SwitchDPError,
    SwitchedSystem,
    as_state,
    check_mode,
)

DEFAULT_BUDGET = 2 ** 20


class BudgetError(SwitchDPError):
    """Enumeration would exceed the allowed number of sequences."""

    def __init__(self, required: int, budget: int):
        super().__init__(
            f"enumeration needs {required} sequences, budget is {budget}; "
            f"raise the budget to at least {required} or shorten the horizon")
        self.required = required
        self.budget = budget


def sequence_cost(system: SwitchedSystem, cost: CostSpec, x0, i_init: int,
                  modes: Sequence[int]) -> float:
    """Cost of applying ``modes`` from ``x0``; identical to the replay trace's total."""
    if len(modes) != cost.horizon:
        raise ArgumentError(f"need {cost.horizon} modes, got {len(modes)}")
    return replay_open_loop(cost, system, x0, i_init, modes).total_cost


def _decode(index: int, mode_count: int, horizon: int) -> list:
    digits = []
    for _ in range(horizon):
        index, digit = divmod(index, mode_count)
        digits.append(digit + 1)
    return digits[::-1]


def enumerate_optimal(system: SwitchedSystem, cost: CostSpec, x0, i_init: int,
                      horizon: int | None = None, budget: int = DEFAULT_BUDGET):
    """Globally optimal cost and sequence over all ``M^N`` schedules.

    Returns ``(optimal_cost, optimal_sequence)``. The reported cost is the
    replay total of the winning sequence, so it equals ``sequence_cost`` of
    that sequence exactly.
    """
    if horizon is not None:
        cost = cost.with_horizon(horizon)
    n_modes = system.mode_count
    if cost.mode_count != n_modes:
        raise ArgumentError("cost and system disagree on the number of modes")
    i_init = check_mode(i_init, n_modes)
    state = as_state(x0, system.state_dim)
    required = n_modes ** cost.horizon
    if required > budget:
        raise BudgetError(required, budget)

    states = state[None, :]
    acc = np.zeros(1)
    last = np.array([i_init])
    table = cost.switch_table
    for _ in range(cost.horizon):
        count = states.shape[0]
        new_states = np.empty((count, n_modes, system.state_dim))
        new_acc = np.empty((count, n_modes))
        for i in range(1, n_modes + 1):
            running = np.broadcast_to(np.asarray(cost.running(states, i), dtype=float), (count,))
            new_acc[:, i - 1] = acc + running + table[last - 1, i - 1]
            new_states[:, i - 1] = system.apply(i, states)
        states = new_states.reshape(count * n_modes, system.state_dim)
        acc = new_acc.reshape(-1)
        last = np.tile(np.arange(1, n_modes + 1), count)

    final = np.empty(acc.shape[0])
    for i in range(1, n_modes + 1):
        sel = last == i
        final[sel] = np.broadcast_to(np.asarray(cost.terminal(states[sel], i), dtype=float), (int(sel.sum()),))
    totals = acc + final
    if not np.all(np.isfinite(totals)):
        raise ArgumentError("enumeration produced non-finite costs")
    best = _decode(int(np.argmin(totals)), n_modes, cost.horizon)
    return sequence_cost(system, cost, state, i_init, best), best
