import gc
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchdp.basis import total_degree_monomials, univariate_powers
from switchdp.bench import example1_scenario, example2_scenario, with_training
from switchdp.model import ArgumentError, CostSpec, SwitchedSystem, uniform_switch_table
from switchdp.training import (
    SolverError,
    TrainingConfig,
    TrainingDataError,
    TrainingError,
    batch_train,
    bellman_target,
    bellman_targets,
    fit_terminal,
    sequential_train,
    train,
)
from trained import example1


def zero(x, mode):
    return np.zeros(np.asarray(x).shape[:-1])


def line_system(modes=1, slope=0.5):
    maps = tuple((lambda x, a=slope * (i + 1): a * np.asarray(x)) for i in range(modes))
    return SwitchedSystem(1, maps, [-1.0], [1.0])


def test_single_mode_target():
    system = line_system()
    basis = univariate_powers(0, 2)
    nxt = np.array([[1.0, 2.0, 3.0]])
    cost = CostSpec(zero, lambda x, m: np.asarray(x)[..., 0], [[0.0]], 1)
    target, arg = bellman_target(system, cost, basis, nxt, [0.4], 1)
    y = 0.5 * 0.4
    assert target == pytest.approx(0.4 + 1 + 2 * y + 3 * y * y, abs=1e-15)
    assert arg == 1


def test_staying_avoids_switch_cost():
    system = line_system(2)
    basis = univariate_powers(1, 2)
    cost = CostSpec(zero, zero, uniform_switch_table(2, 0.1), 1)
    assert bellman_target(system, cost, basis, np.zeros((2, 2)), [0.7], 1) == (0.0, 1)


def test_example1_last_stage_prefers_mode2_at_1_8():
    system, cost, table = example1()
    basis = table.basis
    _, arg = bellman_target(system, cost, basis, table.weights[100], [1.8], 2, stage=99)
    assert arg == 2


def test_target_argument_checks():
    system, cost, table = example1()
    with pytest.raises(ArgumentError):
        bellman_target(system, cost, table.basis, table.weights[100], [1.8], 3)
    with pytest.raises(ArgumentError):
        bellman_target(system, cost, table.basis, table.weights[100][:1], [1.8], 1)


def test_non_finite_candidate_reported():
    system = SwitchedSystem(1, (lambda x: np.asarray(x) / 0.0,), [-1.0], [1.0])
    basis = univariate_powers(1, 2)
    cost = CostSpec(zero, zero, [[0.0]], 1)
    with np.errstate(all="ignore"), pytest.raises(TrainingDataError) as info:
        bellman_target(system, cost, basis, np.ones((1, 2)), [0.5], 1, stage=0)
    assert info.value.stage == 0


def test_realizable_terminal_recovery():
    basis = total_degree_monomials(2, 3)
    c = np.random.default_rng(5).normal(size=basis.size)
    system = SwitchedSystem(2, (lambda x: x,), [-1.0, -1.0], [1.0, 1.0])
    cost = CostSpec(lambda x, m: basis.evaluate_batch(x) @ c, zero, [[0.0]], 0)
    w, _ = fit_terminal(system, cost, basis, TrainingConfig(samples=200, ridge=0.0))
    np.testing.assert_allclose(w[0], c, rtol=1e-8, atol=1e-10)


def test_example1_terminal_residual():
    system, cost, basis, config = example1_scenario()
    _, resid = fit_terminal(system, cost, basis, config)
    assert np.all(resid < 1e-6)


def test_example2_preference_terminal_offset():
    system, cost, basis, config = example2_scenario(0.0, True)
    # constant term is the first graded-lex monomial
    w, _ = fit_terminal(system, cost, basis, with_training(config, ridge=0.0))
    assert w[0, 0] - w[1, 0] == pytest.approx(-10.0, abs=1e-9)
    np.testing.assert_allclose(w[0, 1:], w[1, 1:], atol=1e-7)
    # the default ridge shrinks the offset only slightly
    w, _ = fit_terminal(system, cost, basis, config)
    assert w[0, 0] - w[1, 0] == pytest.approx(-10.0, abs=1e-5)


def test_too_few_samples_refused():
    system, cost, basis, config = example1_scenario(samples=10)
    with pytest.raises(ArgumentError, match="p >= m"):
        train(system, cost, basis, config)


def test_rank_deficient_without_ridge():
    system = SwitchedSystem(1, (lambda x: x,), [-1.0], [1.0])
    basis = univariate_powers(1, 3)
    cost = CostSpec(lambda x, m: np.asarray(x)[..., 0] ** 2, zero, [[0.0]], 0)
    cfg = TrainingConfig(samples=3, ridge=0.0)
    # on a vanishing box the higher powers underflow to zero columns
    degenerate = SwitchedSystem(1, (lambda x: x,), [0.0], [1e-200])
    with pytest.raises(SolverError):
        batch_train(degenerate, cost, basis, cfg)
    assert batch_train(system, cost, basis, cfg).weights.shape == (1, 1, 3)


def test_composition_stage_is_realizable():
    system = line_system()
    basis = univariate_powers(0, 4)
    cost = CostSpec(lambda x, m: np.asarray(x)[..., 0] ** 4 + np.asarray(x)[..., 0], zero, [[0.0]], 1)
    table = batch_train(system, cost, basis, TrainingConfig(samples=50, ridge=0.0))
    assert table.diagnostics["max_residual"].max() < 1e-6
    np.testing.assert_allclose(table.weights[0, 0], [0, 0.5, 0, 0, 0.5 ** 4], atol=1e-9)


def test_determinism():
    system, cost, basis, config = example1_scenario(horizon=20, seed=11)
    a = train(system, cost, basis, config)
    b = train(system, cost, basis, config)
    assert a.weights.tobytes() == b.weights.tobytes()
    assert a.metadata == b.metadata


def test_metadata_and_diagnostics():
    _, _, table = example1()
    assert table.metadata["algorithm"] == "batch"
    assert table.metadata["training"]["samples"] == 1000
    assert table.diagnostics["max_residual"].shape == (101, 2)
    assert table.diagnostics["wall_time_seconds"] < 30


def test_bellman_residual_generalises():
    system, cost, table = example1()
    basis = table.basis
    fresh = np.random.default_rng(99).uniform(-2, 2, (200, 1))
    for k in (0, 25, 50, 75, 99):
        for j in (1, 2):
            resid = [abs(float(basis.evaluate_batch(x) @ table.weights[k, j - 1])
                         - bellman_target(system, cost, basis, table.weights[k + 1], x, j, stage=k)[0])
                     for x in fresh]
            assert np.median(resid) < 10 * table.diagnostics["max_residual"][k, j - 1] + 1e-12


def test_sequential_constant_target_matches_batch():
    system = line_system()
    basis = univariate_powers(0, 2)
    cost = CostSpec(lambda x, m: np.full(np.asarray(x).shape[:-1], 2.5), zero, [[0.0]], 2)
    seq = sequential_train(system, cost, basis, TrainingConfig(max_iterations=1000))
    bat = batch_train(system, cost, basis, TrainingConfig(samples=200))
    np.testing.assert_allclose(seq.weights, bat.weights, atol=1e-4)
    assert seq.metadata["non_converged"] == []


def test_sequential_zero_problem():
    system = line_system(2)
    basis = univariate_powers(1, 3)
    cost = CostSpec(zero, zero, uniform_switch_table(2, 0.0), 3)
    seq = sequential_train(system, cost, basis, TrainingConfig())
    assert np.all(seq.weights == 0.0)
    assert seq.diagnostics["iterations"].max() <= TrainingConfig().convergence_window


def test_sequential_divergence_guard():
    system = line_system()
    basis = univariate_powers(0, 1)
    cost = CostSpec(lambda x, m: np.full(np.asarray(x).shape[:-1], 1e20), zero, [[0.0]], 0)
    with pytest.raises(TrainingError, match="diverged"):
        sequential_train(system, cost, basis, TrainingConfig())


def test_sequential_agrees_with_batch_on_probe_grid():
    system, cost, batch = example1()
    _, _, basis, config = example1_scenario()
    seq = train(system, cost, basis, with_training(config, algorithm="sequential"))
    grid = np.linspace(-2, 2, 100).reshape(-1, 1)

    def decisions(table):
        out = []
        for k in range(100):
            nxt = [basis.evaluate_batch(system.apply(i, grid)) @ table.weights[k + 1, i - 1]
                   for i in (1, 2)]
            scores = np.stack(nxt, axis=1)
            for j in (1, 2):
                out.append(np.argmin(scores + cost.switch_table[j - 1], axis=1))
        return np.concatenate(out)

    assert np.mean(decisions(seq) == decisions(batch)) >= 0.98


def test_example2_training_time():
    system, cost, basis, config = example2_scenario(0.0)
    table = train(system, cost, basis, config)
    assert table.diagnostics["wall_time_seconds"] < 60


def test_runtime_affine_in_horizon():
    system, cost, basis, config = example2_scenario(0.0)

    def best_time(n):
        runs = []
        gc.disable()
        try:
            for _ in range(5):
                started = time.perf_counter()
                train(system, cost.with_horizon(n), basis, config)
                runs.append(time.perf_counter() - started)
        finally:
            gc.enable()
        return min(runs)

    t25, t50, t100 = (best_time(n) for n in (25, 50, 100))
    # increments per added stage should agree
    first, second = (t50 - t25) / 25, (t100 - t50) / 50
    assert abs(second / first - 1) <= 0.3


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.lists(st.floats(-2, 2), min_size=5, max_size=5))
def test_targets_monotone_in_switch_cost(k0, bump, xs):
    system, cost, table = example1()
    states = np.reshape(xs, (-1, 1))
    from switchdp.training import candidate_values
    cand = candidate_values(system, cost, table.basis, table.weights[50], states, stage=49)
    low, _ = bellman_targets(cand, uniform_switch_table(2, k0))
    high, _ = bellman_targets(cand, uniform_switch_table(2, k0 + bump))
    assert np.all(high >= low)
