"""Benchmark systems: forward-Euler discretisation and the two reference scenarios.

``example1``
    Scalar, two modes ``x' = -x`` and ``x' = -x^3``, ``dt = 0.02``,
    ``N = 100``, terminal cost ``5 x_N^2``, no running cost, basis
    ``x^1 .. x^14`` on ``[-2, 2]``.

``example2`` / ``example2-pref``
    Two-tank level control, state ``[y, z]`` (upper and lower tank heights),
    valve closed / half open / fully open, ``dt = 0.025``, ``N = 200``,
    tracking ``z -> 0.5``. The ``-pref`` variant rewards finishing in mode 1
    (terminal offset ``-10``) and charges ``0.01`` per step spent in mode 1.
    Basis: all monomials ``y^p z^q`` with ``p + q <= 8`` (45 terms) on
    ``[0, 1) x [0, 0.8)``, 100 fresh samples per stage.

Euler steps on the two-tank are clamped at zero so heights stay physical and
the square roots stay defined. That clamp is our addition.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .basis import BasisSet, total_degree_monomials, univariate_powers
from .model import ArgumentError, CostSpec, SwitchedSystem, uniform_switch_table
from .training import TrainingConfig

TANK_TARGET = 0.5
PREFERENCE_REWARD = -10.0
PREFERENCE_PENALTY = 0.01


@dataclass(frozen=True)
class ContinuousModeSet:
    """Vector fields ``g_i`` of ``x_dot = g_i(x)`` and the Euler step size."""

    fields: Sequence[Callable[[np.ndarray], np.ndarray]]
    dt: float
    nonneg_clamp: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ArgumentError(f"sampling time must be positive, got {self.dt}")
        if not self.fields:
            raise ArgumentError("at least one vector field is required")


class _EulerMap:
    # a class rather than a closure so maps compare and repr sensibly
    def __init__(self, field, dt, clamp):
        self.field, self.dt, self.clamp = field, dt, clamp

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = x + self.dt * np.asarray(self.field(x), dtype=float)
        return np.maximum(out, 0.0) if self.clamp else out


def euler_discretize(cms: ContinuousModeSet, state_dim: int, domain_lower, domain_upper,
                     name: str = "custom") -> SwitchedSystem:
    maps = tuple(_EulerMap(g, float(cms.dt), cms.nonneg_clamp) for g in cms.fields)
    return SwitchedSystem(state_dim, maps, domain_lower, domain_upper, name=name)


# Example 1 -----------------------------------------------------------------

def _linear_decay(x):
    return -x


def _cubic_decay(x):
    return -(x * x * x)


def _example1_terminal(x, mode):
    x0 = np.asarray(x, dtype=float)[..., 0]
    return 5.0 * x0 * x0


def _zero_running(x, mode):
    return np.zeros(np.asarray(x).shape[:-1])


def example1_scenario(kappa0: float = 0.1, dt: float = 0.02, horizon: int = 100,
                      samples: int = 1000, seed: int = 0):
    """Scalar two-mode scenario. ``dt``/``horizon`` are exposed for scaled variants."""
    cms = ContinuousModeSet((_linear_decay, _cubic_decay), dt)
    system = euler_discretize(cms, 1, [-2.0], [2.0], name="example1")
    cost = CostSpec(_example1_terminal, _zero_running, uniform_switch_table(2, kappa0), horizon)
    basis = univariate_powers(1, 14)
    config = TrainingConfig(samples=samples, seed=seed)
    return system, cost, basis, config


# Example 2 -----------------------------------------------------------------

class TankField:
    """Two-tank dynamics with valve inflow ``inflow``; roots of negatives read as 0."""

    def __init__(self, inflow: float):
        self.inflow = float(inflow)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        root_y = np.sqrt(np.maximum(x[..., 0], 0.0))
        root_z = np.sqrt(np.maximum(x[..., 1], 0.0))
        return np.stack([self.inflow - root_y, root_y - root_z], axis=-1)


class TrackingCost:
    """``0.25 (z - target)^2`` plus a constant per-mode offset."""

    def __init__(self, target: float = TANK_TARGET, offsets: Optional[dict] = None):
        self.target = float(target)
        self.offsets = dict(offsets or {})

    def __call__(self, x, mode):
        z = np.asarray(x, dtype=float)[..., 1]
        return 0.25 * (z - self.target) ** 2 + self.offsets.get(mode, 0.0)


def two_tank_system(dt: float = 0.025) -> SwitchedSystem:
    cms = ContinuousModeSet((TankField(0.0), TankField(0.5), TankField(1.0)), dt, nonneg_clamp=True)
    return euler_discretize(cms, 2, [0.0, 0.0], [1.0, 0.8], name="two-tank")


def example2_scenario(kappa0: float = 0.0, mode_preference: bool = False,
                      dt: float = 0.025, horizon: int = 200, samples: int = 100,
                      seed: int = 0, target: float = TANK_TARGET):
    system = two_tank_system(dt)
    if mode_preference:
        terminal = TrackingCost(target, {1: PREFERENCE_REWARD})
        running = TrackingCost(target, {1: PREFERENCE_PENALTY})
    else:
        terminal = running = TrackingCost(target)
    cost = CostSpec(terminal, running, uniform_switch_table(3, kappa0), horizon)
    basis = total_degree_monomials(2, 8)
    config = TrainingConfig(samples=samples, seed=seed, resample_per_stage=True)
    return system, cost, basis, config


SCENARIOS = ("example1", "example2", "example2-pref")


def scenario(name: str, kappa0: Optional[float] = None, **overrides):
    """Build a named scenario; ``overrides`` go to the scenario constructor."""
    if name == "example1":
        args = dict(overrides)
        if kappa0 is not None:
            args["kappa0"] = kappa0
        return example1_scenario(**args)
    if name in ("example2", "example2-pref"):
        args = dict(overrides)
        if kappa0 is not None:
            args["kappa0"] = kappa0
        return example2_scenario(mode_preference=(name == "example2-pref"), **args)
    raise ArgumentError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")


def with_training(config: TrainingConfig, **changes) -> TrainingConfig:
    return replace(config, **changes)
