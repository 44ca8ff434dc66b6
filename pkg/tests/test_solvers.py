import warnings

import numpy as np
import pytest

from rlmc import rng
from rlmc.basis import CondExpEvaluator, MonomialBasis, PiecewiseAffineBasis, gram_matrix
from rlmc.evaluate import simulate
from rlmc.exceptions import ConfigurationError
from rlmc.measures import UniformBox, sample_layer
from rlmc.model import SeparableReward
from rlmc.optimize import ControlOptimizer, bellman_target
from rlmc.problems.doorways import DoorwaysBudgets, build_doorways, converged_measure
from rlmc.problems.small_dp import SmallDpSpec, brute_force_values, build_small_dp
from rlmc.problems.zero import build_zero
from rlmc.projection import project_exact
from rlmc.solver_perf import PerfSolveConfig, solve_perf
from rlmc.solver_value import ValueSolveConfig, solve_value

from conftest import walk_model


def setup(model, basis=None):
    basis = basis or MonomialBasis(model.state_domain, 2)
    return basis, CondExpEvaluator(model, basis), UniformBox(model.state_domain)


def square(x):
    return np.asarray(x, dtype=float)[..., 0] ** 2


@pytest.mark.parametrize("solve,cfg", [(solve_value, ValueSolveConfig), (solve_perf, PerfSolveConfig)])
def test_zero_problem(solve, cfg):
    model = build_zero()
    basis, ev, mu = setup(model)
    res = solve(model, basis, ev, mu, cfg(50, 0))
    np.testing.assert_array_equal(res.coefficients.alpha, 0.0)
    np.testing.assert_array_equal(res.layer0[1], 0.0)
    assert res.coefficients.alpha.shape == (model.N, basis.K)


def test_single_step_solvers_coincide():
    model = walk_model(N=1, lo=-3, hi=3, terminal=square)
    basis, ev, mu = setup(model)
    a = solve_value(model, basis, ev, mu, ValueSolveConfig(300, 4)).coefficients.alpha
    b = solve_perf(model, basis, ev, mu, PerfSolveConfig(300, 4)).coefficients.alpha
    np.testing.assert_array_equal(a, b)


def test_single_step_coefficients_approach_exact_projection():
    model = walk_model(N=1, lo=-3, hi=3, terminal=square)
    basis, ev, mu = setup(model)
    exact = project_exact(square, basis, mu, gram_matrix(basis, mu)).alpha
    np.testing.assert_allclose(exact, [0, 0, 1], atol=1e-9)
    err = {M: np.mean([np.linalg.norm(solve_value(model, basis, ev, mu, ValueSolveConfig(M, s)).coefficients.alpha[0]
                                      - exact) for s in range(4)]) for M in (1000, 100000)}
    assert err[100000] < 0.05
    assert err[100000] < err[1000] / 4


def test_truncation_bounds_stored_values():
    model = walk_model(N=4, lo=-3, hi=3, terminal=square, running=SeparableReward(lambda n, x: square(x)))
    basis, ev, mu = setup(model)
    res = solve_value(model, basis, ev, mu, ValueSolveConfig(500, 2, gamma=2.0))
    layers = res.diagnostics["layers"]
    assert all(l["within_gamma"] for l in layers[:-1])
    assert max(l["value_max"] for l in layers[:-1]) <= 2.0
    assert max(l["truncation_fraction"] for l in layers) > 0
    assert np.all(np.abs(res.layer0[1]) <= 2.0)
    assert max(l["raw_max"] for l in layers[:-1]) > 2.0


def test_default_gamma_is_trivial_bound():
    from rlmc.model import value_bound

    model = walk_model(N=4, lo=-3, hi=3, terminal=square)
    basis, ev, mu = setup(model)
    res = solve_value(model, basis, ev, mu, ValueSolveConfig(100, 0))
    assert res.diagnostics["gamma"] == value_bound(model) == 3 * 1.0 + 3.0


@pytest.mark.parametrize("solve,cfg", [(solve_value, ValueSolveConfig), (solve_perf, PerfSolveConfig)])
def test_seed_determinism(solve, cfg):
    model = walk_model(N=3, lo=-3, hi=3, terminal=square)
    basis, ev, mu = setup(model)
    a = solve(model, basis, ev, mu, cfg(200, 9)).coefficients.alpha
    b = solve(model, basis, ev, mu, cfg(200, 9)).coefficients.alpha
    c = solve(model, basis, ev, mu, cfg(200, 10)).coefficients.alpha
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


def test_small_sample_warns_but_runs():
    model = walk_model(N=2, lo=-3, hi=3)
    basis, ev, mu = setup(model, MonomialBasis(walk_model(lo=-3, hi=3).state_domain, 4))
    with pytest.warns(UserWarning, match="M=3 < K=5"):
        res = solve_value(model, basis, ev, mu, ValueSolveConfig(3, 0))
    assert np.all(np.isfinite(res.coefficients.alpha))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        solve_value(model, basis, ev, mu, ValueSolveConfig(5, 0))


@pytest.mark.parametrize("cfg", [ValueSolveConfig(0, None, gamma=-1.0), PerfSolveConfig(0, None)])
def test_invalid_configuration_lists_every_error(cfg):
    model = walk_model(N=2, lo=-3, hi=3)
    basis, ev, mu = setup(model)
    solve = solve_value if isinstance(cfg, ValueSolveConfig) else solve_perf
    with pytest.raises(ConfigurationError) as exc:
        solve(model, basis, ev, mu, cfg)
    errors = exc.value.context["errors"]
    assert any("M" in e for e in errors) and any("seed" in e for e in errors)
    if isinstance(cfg, ValueSolveConfig):
        assert any("gamma" in e for e in errors)


def test_seed_streams_are_disjoint():
    keys = {rng.stream_key(s, n) for s in (rng.TRAIN, rng.RESIM, rng.EVAL, rng.INNER_MC, rng.FIT) for n in range(50)}
    assert len(keys) == 250
    draws = [rng.generator(7, s, 3).random(4).tobytes() for s in (rng.TRAIN, rng.RESIM, rng.EVAL)]
    assert len(set(draws)) == 3
    mu = UniformBox(walk_model(lo=0, hi=1).state_domain)
    layers = [sample_layer(mu, n, 5, 7).tobytes() for n in range(10)]
    assert len(set(layers)) == 10


def test_pathwise_targets_agree_with_conditional_expectation():
    # two steps, so the first regression target is a genuine random path functional
    model = walk_model(N=2, sd=0.3, lo=-6, hi=6, terminal=square, running=SeparableReward(lambda n, x: -square(x), quad=-0.5))
    basis, ev, mu = setup(model)
    mu = UniformBox(type(model.state_domain)([-2.0], [2.0]))
    M, seed = 4000, 3
    res = solve_perf(model, basis, ev, mu, PerfSolveConfig(M, seed))
    alpha = res.coefficients.alpha
    x1 = sample_layer(mu, 1, M, seed)
    gen = rng.generator(seed, rng.RESIM, 1)
    j, _, _ = simulate(model, alpha, ev, ControlOptimizer(), 1, x1, gen)
    # high inner-sample estimate of E[J | x1] under the same control map
    inner = 2000
    gen_inner = rng.generator(seed, rng.INNER_MC, 1)
    cond = np.zeros(M)
    for s in range(0, M, 200):
        block = np.repeat(x1[s:s + 200], inner, axis=0)
        perf, _, _ = simulate(model, alpha, ev, ControlOptimizer(), 1, block, gen_inner)
        cond[s:s + 200] = perf.reshape(-1, inner).mean(axis=1)
    gram = gram_matrix(basis, mu)
    phi = basis(x1)
    a_path = gram.solve(phi.T @ j / M)
    a_cond = gram.solve(phi.T @ cond / M)
    np.testing.assert_allclose(a_path, alpha[0], rtol=1e-12)
    # covariance of the difference from the residual J - E[J|x]
    w = phi * (j - cond)[:, None]
    cov = gram.solve(gram.solve(np.cov(w.T)).T) / M
    se = np.sqrt(np.diag(cov))
    assert np.all(np.abs(a_path - a_cond) <= 4 * se)


def test_small_dp_error_decreases_with_sample_size():
    spec = SmallDpSpec()
    model = build_small_dp(spec)
    basis, ev, mu = setup(model, PiecewiseAffineBasis.uniform(model.state_domain, 16))
    xs, values = brute_force_values(spec)
    probes = np.linspace(-0.95, 0.95, 20)[:, None]
    ref = np.interp(probes[:, 0], xs, values[0])
    rms = []
    for M in (250, 1000, 4000):
        errs = []
        for seed in range(5):
            res = solve_value(model, basis, ev, mu, ValueSolveConfig(M, seed))
            v, _ = bellman_target(0, probes, res.coefficients.row(1), model, ev)
            errs.append(np.sqrt(np.mean((v - ref) ** 2)))
        rms.append(np.mean(errs))
    assert rms[0] > rms[1] > rms[2]


@pytest.fixture(scope="module")
def doorways_schedule():
    model = build_doorways()
    basis = MonomialBasis(model.state_domain, 2)
    ev = CondExpEvaluator(model, basis)
    it = converged_measure(model, basis, ev, "performance", DoorwaysBudgets(M=1000, measure_iters=2))
    return model, basis, ev, it.measure


@pytest.mark.slow
def test_performance_targets_are_noisier(doorways_schedule):
    model, basis, ev, measure = doorways_schedule
    rv = solve_value(model, basis, ev, measure, ValueSolveConfig(1000, 1))
    rp = solve_perf(model, basis, ev, measure, PerfSolveConfig(1000, 1))
    vv = np.array([l["target_variance"] for l in rv.diagnostics["layers"]])
    vp = np.array([l["target_variance"] for l in rp.diagnostics["layers"]])
    assert vp[-1] == vv[-1]
    assert vp.sum() > 1.5 * vv.sum()
    assert np.mean(vp >= vv) >= 0.8
    bound = rp.diagnostics["value_bound"]
    assert all(l["within_bound"] for l in rp.diagnostics["layers"])
    assert all(l["max_abs"] <= bound for l in rp.diagnostics["layers"])
