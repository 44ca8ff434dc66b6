import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import ndtr

from rlmc.exceptions import ArgumentError, ConstructionError
from rlmc.model import Box, ControlSet, TimeGrid, pathwise_performance, step, value_bound
from rlmc.problems.doorways import DoorwaysSpec, build_doorways
from rlmc.problems.lq import LqSpec, build_lq


def uniform_for(z):
    return ndtr(np.asarray(z, dtype=float))


def test_lq_step_example(lq_model):
    x1 = step(lq_model, 0, np.array([0.0]), uniform_for([0.0]), np.array([0.0]))
    assert x1 == pytest.approx([0.01], abs=1e-15)


def test_doorways_step_clamps_at_upper_bound():
    model = build_doorways()
    x1 = step(model, 0, np.array([2.0]), uniform_for([5.0]), np.array([0.0]))
    assert x1 == pytest.approx([2.0])


def test_doorways_large_control_moves_one_unit():
    model = build_doorways(DoorwaysSpec(control=(-100.0, 100.0)))
    x1 = step(model, 0, np.array([0.0]), uniform_for([0.0]), np.array([100.0]))
    assert x1 == pytest.approx([1.0])


def test_step_rejects_out_of_set_control_and_time(lq_model):
    with pytest.raises(ArgumentError):
        step(lq_model, 0, np.array([0.0]), np.array([0.5]), np.array([11.0]))
    with pytest.raises(ArgumentError):
        step(lq_model, lq_model.N, np.array([0.0]), np.array([0.5]), np.array([0.0]))


def test_pathwise_performance_lq_two_steps():
    model = build_lq(LqSpec(N=2))
    states = np.array([[1.0], [0.5], [2.0]])
    controls = np.array([[1.0], [0.0]])
    # (1 + 1)/2 + (0.25 + 0)/2 + 4
    assert pathwise_performance(model, 0, states, controls) == pytest.approx(1.0 + 0.125 + 4.0)


def test_doorways_performance_examples():
    model = build_doorways(DoorwaysSpec())
    controls = np.zeros((model.N, 1))
    path = np.zeros((model.N + 1, 1))
    path[50] = 0.5
    path[75] = -0.5
    assert pathwise_performance(model, 0, path, controls) == 0.0
    path[50] = 0.0  # outside door 2 = [0.2, 0.8]
    assert pathwise_performance(model, 0, path, controls) == pytest.approx(100.0)
    controls[10] = 2.0
    assert pathwise_performance(model, 0, path, controls) == pytest.approx(104.0)


def test_doorways_running_cost_examples():
    model = build_doorways(DoorwaysSpec())
    f = model.running_reward
    u = np.array([3.0])
    assert f(50, np.array([0.5]), u) == pytest.approx(9.0)
    assert f(50, np.array([0.0]), u) == pytest.approx(109.0)
    assert f(49, np.array([0.0]), u) == pytest.approx(9.0)
    assert model.terminal_reward(np.array([1.0])) == pytest.approx(100.0)


def test_pathwise_performance_checks_lengths(lq_model):
    with pytest.raises(ArgumentError):
        pathwise_performance(lq_model, 0, np.zeros((5, 1)), np.zeros((4, 1)))


def test_value_bound_doorways():
    spec = DoorwaysSpec()
    model = build_doorways(spec)
    u_max = 30.0
    assert value_bound(model) == pytest.approx(99 * (u_max ** 2 + 100) + 100)


def test_construction_errors():
    with pytest.raises(ConstructionError):
        TimeGrid(0)
    with pytest.raises(ConstructionError):
        Box([1.0], [0.0])
    with pytest.raises(ConstructionError):
        Box([0.0], [np.inf])
    with pytest.raises(ConstructionError):
        ControlSet([0.0], [1.0], discrete=True)


@given(x=st.floats(-5, 5), u=st.floats(-10, 10), xi=st.floats(1e-12, 1 - 1e-12), n=st.integers(0, 99))
def test_lq_step_stays_in_domain(lq_model, x, u, xi, n):
    x1 = step(lq_model, n, np.array([x]), np.array([xi]), np.array([u]))
    assert lq_model.state_domain.contains(x1, atol=0.0)


@given(x=st.floats(-2, 2), u=st.floats(-30, 30), xi=st.floats(0, 1), n=st.integers(0, 99))
def test_doorways_step_stays_in_domain(x, u, xi, n):
    model = build_doorways()
    x1 = step(model, n, np.array([x]), np.array([xi]), np.array([u]))
    assert model.state_domain.contains(x1, atol=0.0)


@given(seed=st.integers(0, 2 ** 32 - 1), n=st.integers(1, 99))
def test_lq_pathwise_performance_within_bound(lq_model, seed, n):
    rng = np.random.default_rng(seed)
    states = rng.uniform(-5, 5, (lq_model.N - n + 1, 1))
    controls = rng.uniform(-10, 10, (lq_model.N - n, 1))
    assert abs(pathwise_performance(lq_model, n, states, controls)) <= value_bound(lq_model)
