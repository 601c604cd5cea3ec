"""Backward-in-time training of the mode-indexed value weights.

Both trainers start from the terminal fit ``W_N^j . phi(x) ~ psi(x, j)`` and
then step ``k = N-1 .. 0``, fitting ``W_k^j`` to the Bellman target

    min_i  Q(x, i) + kappa(j, i) + W_{k+1}^i . phi(f_i(x))

on states drawn uniformly from the domain box.

Regression runs on column-scaled features ``phi_t(x) / s_t`` where ``s_t`` is
the largest ``|phi_t|`` over the box. High-degree monomials otherwise span
many orders of magnitude and the ridge penalty would be meaningless. The
ridge strength is applied in the scaled coordinates.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .basis import BasisSet
from .model import ArgumentError, CostSpec, SwitchDPError, SwitchedSystem, as_state, check_mode
from .valuestore import ValueTable

AUTO_RIDGE_FACTOR = 1e-9


class TrainingError(SwitchDPError):
    """Training failed (divergence, bad configuration for the problem size)."""


class TrainingDataError(TrainingError):
    """A Bellman candidate evaluated to a non-finite number."""

    def __init__(self, message: str, x=None, mode=None, stage=None):
        super().__init__(message)
        self.x = x
        self.mode = mode
        self.stage = stage


class SolverError(TrainingError):
    """The least-squares system is rank deficient and no ridge was requested."""


@dataclass(frozen=True)
class TrainingConfig:
    """Knobs for both trainers.

    ``samples`` is ``p`` for batch training. ``max_iterations`` caps the
    single-sample updates per ``(k, j)`` pair in sequential training.
    ``ridge=None`` selects ``1e-9 * trace(A^T A) / m`` on the scaled features.
    """

    samples: int = 1000
    ridge: Optional[float] = None
    seed: int = 0
    algorithm: str = "batch"
    resample_per_stage: bool = False
    successors_in_domain: bool = False
    max_iterations: int = 1000
    convergence_tol: float = 1e-6
    convergence_window: int = 50
    rls_initial_covariance: float = 1e6
    divergence_bound: float = 1e12

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < 1:
            raise ArgumentError("samples must be a positive integer")
        if self.ridge is not None and not (self.ridge >= 0.0):
            raise ArgumentError("ridge must be non-negative")
        if self.algorithm not in ("batch", "sequential"):
            raise ArgumentError(f"unknown training algorithm {self.algorithm!r}")
        if self.max_iterations < 1 or self.convergence_window < 1:
            raise ArgumentError("max_iterations and convergence_window must be positive")
        if not self.convergence_tol > 0:
            raise ArgumentError("convergence_tol must be positive")
        if not self.rls_initial_covariance > 0:
            raise ArgumentError("rls_initial_covariance must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def _check_sizes(system: SwitchedSystem, cost: CostSpec, basis: BasisSet):
    if cost.mode_count != system.mode_count:
        raise ArgumentError(
            f"cost has {cost.mode_count} modes, system has {system.mode_count}")
    if basis.input_dim != system.state_dim:
        raise ArgumentError(
            f"basis is over R^{basis.input_dim}, system state is R^{system.state_dim}")


def _as_column(values, count: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(values, dtype=float), (count,)).astype(float)


class RidgeFit:
    """Ridge least squares on a fixed design, reusable across many targets.

    Minimises ``|A w - y|^2 + lam |w|^2`` with ``A = features / scale`` and
    returns ``w / scale`` so callers get weights for the unscaled basis.
    """

    def __init__(self, features: np.ndarray, scale: np.ndarray, ridge: Optional[float]):
        self.scale = scale
        self.design = features / scale
        u, s, vt = np.linalg.svd(self.design, full_matrices=False)
        m = self.design.shape[1]
        lam = AUTO_RIDGE_FACTOR * float(np.sum(s * s)) / m if ridge is None else float(ridge)
        if lam == 0.0:
            tol = s.max() * max(self.design.shape) * np.finfo(float).eps
            if self.design.shape[0] < m or s.min() <= tol:
                raise SolverError(
                    "least-squares design is rank deficient; use a positive ridge")
        self.ridge = lam
        self._u = u
        self._vt = vt
        self._filter = s / (s * s + lam)

    def solve(self, targets: np.ndarray) -> np.ndarray:
        """Weights for ``targets`` of shape ``(p,)`` or ``(p, r)``."""
        t = np.asarray(targets, dtype=float)
        proj = self._u.T @ t
        proj = (self._filter * proj.T).T
        coef = self._vt.T @ proj
        return (coef.T / self.scale).T

    def residuals(self, weights: np.ndarray, targets: np.ndarray) -> np.ndarray:
        return self.design @ (np.asarray(weights) * self.scale).T - targets


def _draw(rng: np.random.Generator, system: SwitchedSystem, count: int,
          successors_in_domain: bool) -> np.ndarray:
    lo, hi = system.domain_lower, system.domain_upper
    if not successors_in_domain:
        return rng.uniform(lo, hi, size=(count, system.state_dim))
    kept = []
    have = 0
    for _ in range(1000):
        batch = rng.uniform(lo, hi, size=(count, system.state_dim))
        ok = np.ones(count, dtype=bool)
        for mode in range(1, system.mode_count + 1):
            ok &= system.in_domain(system.apply(mode, batch))
        kept.append(batch[ok])
        have += int(ok.sum())
        if have >= count:
            return np.concatenate(kept)[:count]
    raise TrainingError("could not draw samples whose successors stay in the domain")


def candidate_values(system: SwitchedSystem, cost: CostSpec, basis: BasisSet,
                     next_weights: np.ndarray, states: np.ndarray,
                     stage: Optional[int] = None) -> np.ndarray:
    """``Q(x, i) + W_{k+1}^i . phi(f_i(x))`` for every sample and mode, shape ``(p, M)``.

    The switching cost is added by the caller, since it depends on ``j``.
    """
    count = states.shape[0]
    out = np.empty((count, system.mode_count))
    for i in range(1, system.mode_count + 1):
        nxt = system.apply(i, states)
        out[:, i - 1] = _as_column(cost.running(states, i), count) + basis.evaluate_batch(nxt) @ next_weights[i - 1]
    bad = ~np.isfinite(out)
    if bad.any():
        q, col = np.argwhere(bad)[0]
        raise TrainingDataError(
            f"non-finite Bellman candidate at stage {stage}, mode {col + 1}, x={states[q].tolist()}",
            x=states[q].copy(), mode=int(col + 1), stage=stage)
    return out


def bellman_targets(candidates: np.ndarray, switch_table: np.ndarray):
    """Targets and minimisers for every already-active mode ``j``.

    Returns ``(targets, argmins)`` of shape ``(p, M)``; column ``j-1`` is for
    ``j``. Minimisers are 1-based and ties go to the lowest mode index.
    """
    # totals[q, j, i] = candidates[q, i] + kappa(j, i)
    totals = candidates[:, None, :] + switch_table[None, :, :]
    idx = np.argmin(totals, axis=2)
    return np.take_along_axis(totals, idx[:, :, None], axis=2)[:, :, 0], idx + 1


def bellman_target(system: SwitchedSystem, cost: CostSpec, basis: BasisSet,
                   next_weights, x, j: int, stage: Optional[int] = None):
    """Bellman target for one state and already-active mode ``j``.

    Returns ``(target, minimizer)`` with the minimizer as a 1-based mode.
    """
    _check_sizes(system, cost, basis)
    j = check_mode(j, system.mode_count)
    state = as_state(x, system.state_dim)
    nw = np.asarray(next_weights, dtype=float)
    if nw.shape != (system.mode_count, basis.size):
        raise ArgumentError(f"next_weights must have shape ({system.mode_count}, {basis.size}), got {nw.shape}")
    cand = candidate_values(system, cost, basis, nw, state[None, :], stage)
    targets, argmins = bellman_targets(cand, cost.switch_table)
    return float(targets[0, j - 1]), int(argmins[0, j - 1])


def _terminal_targets(cost: CostSpec, states: np.ndarray, mode_count: int) -> np.ndarray:
    count = states.shape[0]
    out = np.column_stack([_as_column(cost.terminal(states, j), count)
                           for j in range(1, mode_count + 1)])
    if not np.all(np.isfinite(out)):
        raise TrainingDataError("terminal cost is not finite on the sampled states",
                                stage=cost.horizon)
    return out


def _require_enough_samples(config: TrainingConfig, basis: BasisSet):
    if config.samples < basis.size:
        raise ArgumentError(
            f"samples p={config.samples} is below basis size m={basis.size}; "
            f"batch training needs p >= m")


def _fit(design_states, basis, scale, ridge, targets, stage):
    try:
        fit = RidgeFit(basis.evaluate_batch(design_states), scale, ridge)
    except SolverError as exc:
        raise SolverError(f"stage {stage}: {exc}") from None
    weights = fit.solve(targets).T
    resid = np.abs(fit.residuals(weights, targets))
    return fit, weights, resid


def fit_terminal(system: SwitchedSystem, cost: CostSpec, basis: BasisSet,
                 config: TrainingConfig):
    """Ridge fit of ``W_N^j`` to ``psi(., j)`` for every mode.

    Returns ``(weights, max_residuals)`` with shapes ``(M, m)`` and ``(M,)``.
    """
    _check_sizes(system, cost, basis)
    _require_enough_samples(config, basis)
    rng = np.random.default_rng(config.seed)
    states = _draw(rng, system, config.samples, config.successors_in_domain)
    scale = basis.scale_over_box(system.domain_lower, system.domain_upper)
    targets = _terminal_targets(cost, states, system.mode_count)
    _, weights, resid = _fit(states, basis, scale, config.ridge, targets, cost.horizon)
    return weights, resid.max(axis=0)


def _metadata(config: TrainingConfig, extra: dict) -> dict:
    meta = {"training": config.to_dict()}
    meta.update(extra)
    return meta


def batch_train(system: SwitchedSystem, cost: CostSpec, basis: BasisSet,
                config: TrainingConfig, metadata: Optional[dict] = None) -> ValueTable:
    """Batch backward training.

    Samples are drawn once up front unless ``config.resample_per_stage``.
    The returned table carries ``diagnostics`` with per-stage maximum and
    RMS residuals on the training samples, and the ridge used per stage.
    """
    _check_sizes(system, cost, basis)
    _require_enough_samples(config, basis)
    horizon, modes = cost.horizon, system.mode_count
    rng = np.random.default_rng(config.seed)
    scale = basis.scale_over_box(system.domain_lower, system.domain_upper)
    weights = np.zeros((horizon + 1, modes, basis.size))
    max_resid = np.zeros((horizon + 1, modes))
    rms_resid = np.zeros((horizon + 1, modes))
    ridges = np.zeros(horizon + 1)
    started = time.perf_counter()

    states = _draw(rng, system, config.samples, config.successors_in_domain)
    targets = _terminal_targets(cost, states, modes)
    fit, weights[horizon], resid = _fit(states, basis, scale, config.ridge, targets, horizon)
    max_resid[horizon], rms_resid[horizon] = resid.max(axis=0), np.sqrt((resid ** 2).mean(axis=0))
    ridges[horizon] = fit.ridge

    for k in range(horizon - 1, -1, -1):
        if config.resample_per_stage:
            states = _draw(rng, system, config.samples, config.successors_in_domain)
            fit = None
        cand = candidate_values(system, cost, basis, weights[k + 1], states, stage=k)
        targets, _ = bellman_targets(cand, cost.switch_table)
        if fit is None:
            fit, weights[k], resid = _fit(states, basis, scale, config.ridge, targets, k)
        else:
            weights[k] = fit.solve(targets).T
            resid = np.abs(fit.residuals(weights[k], targets))
        max_resid[k], rms_resid[k] = resid.max(axis=0), np.sqrt((resid ** 2).mean(axis=0))
        ridges[k] = fit.ridge

    table = ValueTable(basis=basis, weights=weights,
                       metadata=_metadata(config, dict(metadata or {}, algorithm="batch")))
    table.diagnostics = {
        "max_residual": max_resid,
        "rms_residual": rms_resid,
        "ridge": ridges,
        "wall_time_seconds": time.perf_counter() - started,
    }
    return table


def _rls_pair(design: np.ndarray, targets: np.ndarray, start: np.ndarray, scale: np.ndarray,
              config: TrainingConfig, stage: int, mode: int):
    """Run single-sample recursive least squares over ``design`` rows.

    Works in scaled coordinates and stops once the unscaled weight change
    stayed below the tolerance for a full window. Returns
    ``(weights, iterations, converged)``.
    """
    m = design.shape[1]
    w = start * scale
    cov = np.eye(m) * config.rls_initial_covariance
    quiet = 0
    for t in range(design.shape[0]):
        a = design[t]
        pa = cov @ a
        gain = pa / (1.0 + a @ pa)
        delta = gain * (targets[t] - a @ w)
        w = w + delta
        cov = cov - np.outer(gain, pa)
        if not np.all(np.isfinite(w)) or np.abs(w).max() > config.divergence_bound:
            raise TrainingError(f"sequential update diverged at stage {stage}, mode {mode}, iteration {t}")
        if np.abs(delta / scale).max() < config.convergence_tol:
            quiet += 1
            if quiet >= config.convergence_window:
                return w / scale, t + 1, True
        else:
            quiet = 0
    return w / scale, design.shape[0], False


def sequential_train(system: SwitchedSystem, cost: CostSpec, basis: BasisSet,
                     config: TrainingConfig, metadata: Optional[dict] = None) -> ValueTable:
    """Sequential training with one recursive-least-squares update per sample.

    Each ``(k, j)`` pair starts from zero at the terminal stage and from
    ``W_{k+1}^j`` otherwise, and sees up to ``config.max_iterations`` fresh
    samples. Pairs that hit the cap are listed in ``metadata['non_converged']``.
    """
    _check_sizes(system, cost, basis)
    horizon, modes = cost.horizon, system.mode_count
    rng = np.random.default_rng(config.seed)
    scale = basis.scale_over_box(system.domain_lower, system.domain_upper)
    weights = np.zeros((horizon + 1, modes, basis.size))
    iterations = np.zeros((horizon + 1, modes), dtype=int)
    non_converged = []
    started = time.perf_counter()

    for k in range(horizon, -1, -1):
        for j in range(1, modes + 1):
            states = _draw(rng, system, config.max_iterations, config.successors_in_domain)
            if k == horizon:
                targets = _as_column(cost.terminal(states, j), states.shape[0])
                if not np.all(np.isfinite(targets)):
                    raise TrainingDataError("terminal cost is not finite on the sampled states",
                                            stage=k, mode=j)
                start = np.zeros(basis.size)
            else:
                cand = candidate_values(system, cost, basis, weights[k + 1], states, stage=k)
                totals = cand + cost.switch_table[j - 1][None, :]
                targets = totals.min(axis=1)
                start = weights[k + 1, j - 1]
            design = basis.evaluate_batch(states) / scale
            w, used, ok = _rls_pair(design, targets, start, scale, config, k, j)
            weights[k, j - 1] = w
            iterations[k, j - 1] = used
            if not ok:
                non_converged.append([k, j])

    extra = dict(metadata or {}, algorithm="sequential", non_converged=non_converged)
    table = ValueTable(basis=basis, weights=weights, metadata=_metadata(config, extra))
    table.diagnostics = {
        "iterations": iterations,
        "wall_time_seconds": time.perf_counter() - started,
    }
    return table


def train(system, cost, basis, config: TrainingConfig, metadata: Optional[dict] = None) -> ValueTable:
    """Dispatch on ``config.algorithm``."""
    if config.algorithm == "sequential":
        return sequential_train(system, cost, basis, config, metadata)
    return batch_train(system, cost, basis, config, metadata)
