import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from switchdp.bench import (
    ContinuousModeSet,
    euler_discretize,
    example1_scenario,
    example2_scenario,
    scenario,
    two_tank_system,
)
from switchdp.control import replay_open_loop
from switchdp.model import ArgumentError, step


def test_euler_step():
    system = euler_discretize(ContinuousModeSet((lambda x: -x,), 0.02), 1, [-2.0], [2.0])
    assert step(system, 1, [1.0])[0] == pytest.approx(0.98, abs=1e-15)


def test_two_tank_clamp():
    out = step(two_tank_system(0.025), 1, [0.0001, 0.0])
    assert out[0] == 0.0


def test_zero_sampling_time_rejected():
    with pytest.raises(ArgumentError):
        ContinuousModeSet((lambda x: -x,), 0.0)


def test_example1_definition():
    system, cost, basis, config = example1_scenario(0.1)
    assert cost.switch_table.tolist() == [[0.0, 0.1], [0.1, 0.0]]
    assert cost.horizon == 100
    assert basis.size == 14
    assert system.domain_lower.tolist() == [-2.0] and system.domain_upper.tolist() == [2.0]
    assert config.samples == 1000
    assert float(cost.terminal(np.array([1.0]), 1)) == 5.0
    assert float(cost.running(np.array([1.0]), 2)) == 0.0


def test_example2_definition():
    system, cost, basis, config = example2_scenario(0.001, True)
    assert basis.size == 45
    assert cost.horizon == 200
    assert system.mode_count == 3
    assert config.samples == 100
    x = np.array([0.3, 0.7])
    assert float(cost.terminal(x, 1)) == pytest.approx(0.25 * 0.2 ** 2 - 10, abs=1e-15)
    assert float(cost.terminal(x, 2)) == pytest.approx(0.25 * 0.2 ** 2, abs=1e-15)
    assert float(cost.running(x, 1)) == pytest.approx(0.25 * 0.2 ** 2 + 0.01, abs=1e-15)
    _, plain, _, _ = example2_scenario(0.0)
    assert float(plain.terminal(x, 1)) == float(plain.terminal(x, 3))


def test_scenario_lookup():
    assert scenario("example2-pref", 0.5)[1].switch_table[0, 1] == 0.5
    with pytest.raises(ArgumentError):
        scenario("example3")


@pytest.mark.filterwarnings("ignore:initial state")
@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1.5), min_size=2, max_size=2),
       st.lists(st.integers(1, 3), min_size=60, max_size=60))
def test_two_tank_stays_nonnegative(x0, modes):
    system, cost, _, _ = example2_scenario(0.0, horizon=60)
    states = replay_open_loop(cost, system, x0, 1, modes).states
    assert np.all(states >= 0.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-2, 2), st.lists(st.integers(1, 2), min_size=100, max_size=100))
def test_example1_domain_invariance(x0, modes):
    system, cost, _, _ = example1_scenario()
    trace = replay_open_loop(cost, system, [x0], 1, modes)
    assert np.all(np.abs(trace.states) <= 2.0)
    assert not trace.out_of_domain.any()
