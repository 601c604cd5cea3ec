import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchdp.bench import example1_scenario, example2_scenario, two_tank_system
from switchdp.model import (
    ArgumentError,
    CostSpec,
    SwitchedSystem,
    build_trace,
    check_mode,
    step,
    switching_cost,
    trace_cost,
    uniform_switch_table,
)


def zero(x, mode):
    return 0.0


def test_example1_mode1_step():
    system, *_ = example1_scenario()
    assert step(system, 1, [1.0])[0] == pytest.approx(0.98, abs=1e-15)


def test_example1_mode2_equilibrium():
    system, *_ = example1_scenario()
    assert step(system, 2, [0.0])[0] == 0.0


def test_two_tank_fill_from_empty():
    out = step(two_tank_system(), 3, [0.0, 0.0])
    np.testing.assert_allclose(out, [0.025, 0.0], atol=1e-15)


def test_step_rejects_bad_mode_and_dimension():
    system, *_ = example1_scenario()
    with pytest.raises(ArgumentError):
        step(system, 3, [1.0])
    with pytest.raises(ArgumentError):
        step(system, 0, [1.0])
    with pytest.raises(ArgumentError):
        step(system, 1, [1.0, 2.0])
    with pytest.raises(ArgumentError):
        step(system, True, [1.0])


def test_step_is_pure():
    system = two_tank_system()
    x = np.array([0.3, 0.7])
    first = step(system, 2, x)
    again = step(system, 2, x)
    assert np.array_equal(first, again)
    assert np.array_equal(x, [0.3, 0.7])


def test_domain_box_must_be_ordered():
    with pytest.raises(ArgumentError):
        SwitchedSystem(1, (lambda x: x,), [1.0], [0.0])


def test_switching_costs():
    _, cost, *_ = example1_scenario(0.1)
    assert switching_cost(cost, 1, 2) == 0.1
    assert switching_cost(cost, 2, 2) == 0.0
    _, cost2, *_ = example2_scenario(0.001)
    assert switching_cost(cost2, 2, 3) == 0.001


def test_nonzero_diagonal_rejected():
    with pytest.raises(ArgumentError):
        CostSpec(zero, zero, [[0.0, 1.0], [1.0, 0.5]], 3)


def test_horizon_validated():
    with pytest.raises(ArgumentError):
        CostSpec(zero, zero, [[0.0]], -1)
    with pytest.raises(ArgumentError):
        CostSpec(zero, zero, [[0.0]], 2.5)


def test_negative_switch_entries_allowed():
    cost = CostSpec(zero, zero, [[0.0, -0.2], [0.3, 0.0]], 2)
    assert switching_cost(cost, 1, 2) == -0.2


def test_degenerate_zero_horizon_trace():
    _, cost, *_ = example1_scenario()
    cost = cost.with_horizon(0)
    trace = build_trace(cost, [[1.2]], [], 2)
    assert trace.total_cost == 5.0 * 1.2 ** 2
    assert trace_cost(cost, trace) == trace.total_cost
    assert trace.final_mode == 2
    assert trace.switch_count == 0


def test_trace_cost_length_mismatch():
    _, cost, *_ = example1_scenario(horizon=3)
    trace = build_trace(cost.with_horizon(2), [[1.0], [0.9], [0.8]], [1, 1], 1)
    with pytest.raises(ArgumentError):
        trace_cost(cost, trace)


def test_all_mode2_trace_from_1_8():
    system, cost, *_ = example1_scenario()
    states = [[1.8]]
    for _ in range(100):
        states.append(step(system, 2, states[-1]))
    trace = build_trace(cost, states, [2] * 100, 2)
    assert trace.total_cost == pytest.approx(1.15, rel=0.1)


def test_all_mode1_trace_from_1_3():
    system, cost, *_ = example1_scenario()
    states = [[1.3]]
    for _ in range(100):
        states.append(step(system, 1, states[-1]))
    trace = build_trace(cost, states, [1] * 100, 1)
    assert trace.total_cost == pytest.approx(0.155, rel=0.1)


def test_switch_steps_and_counts():
    _, cost, *_ = example1_scenario(horizon=4)
    trace = build_trace(cost, np.zeros((5, 1)), [2, 2, 1, 2], 1)
    assert trace.switch_steps == [0, 2, 3]
    assert trace.total_cost == pytest.approx(0.3)


def test_check_mode_accepts_numpy_ints():
    assert check_mode(np.int64(2), 3) == 2


@st.composite
def random_traces(draw):
    modes_n = draw(st.integers(1, 4))
    horizon = draw(st.integers(0, 12))
    kappa = draw(st.floats(0, 5))
    states = draw(st.lists(st.floats(-10, 10), min_size=horizon + 1, max_size=horizon + 1))
    modes = draw(st.lists(st.integers(1, modes_n), min_size=horizon, max_size=horizon))
    init = draw(st.integers(1, modes_n))
    return modes_n, horizon, kappa, states, modes, init


@settings(max_examples=200, deadline=None)
@given(random_traces())
def test_trace_cost_decomposes(case):
    modes_n, horizon, kappa, states, modes, init = case

    def running(x, mode):
        return 0.5 * np.asarray(x)[..., 0] ** 2 + mode

    def terminal(x, mode):
        return 3.0 * np.abs(np.asarray(x)[..., 0]) - mode

    cost = CostSpec(terminal, running, uniform_switch_table(modes_n, kappa), horizon)
    trace = build_trace(cost, np.reshape(states, (-1, 1)), modes, init)
    parts = trace.terminal_cost + math.fsum(trace.stage_costs) + math.fsum(trace.switch_costs)
    assert trace_cost(cost, trace) == trace.total_cost == parts
    switches = sum(1 for a, b in zip([init] + modes[:-1], modes) if a != b)
    assert math.isclose(math.fsum(trace.switch_costs), switches * kappa, abs_tol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.floats(-100, 100, allow_nan=False))
def test_uniform_table_diagonal_zero(modes_n, kappa):
    table = uniform_switch_table(modes_n, kappa)
    assert np.all(np.diag(table) == 0.0)
    cost = CostSpec(zero, zero, table, 1)
    for i in range(1, modes_n + 1):
        assert switching_cost(cost, i, i) == 0.0
