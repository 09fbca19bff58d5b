import math
import warnings

import numpy as np
import pytest

from distls.dual import dual_gradient, dual_hessian, dual_increment, dual_value, spectral_diagnostics
from distls.errors import InvalidArgument
from distls.problem import primal_objective, random_problem
from distls.solver import (
    IterationRecord,
    SolverConfig,
    initial_lambda,
    iterations_to_unit_stepsize,
    sigma_admissible,
    solve,
)
from tests.conftest import SINH1


def quiet_solve(p, cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return solve(p, cfg)


@pytest.mark.parametrize("mode", ["addn-centralized-ls", "addn-distributed-ls"])
@pytest.mark.parametrize("N", [0, 2])
def test_two_node_optimum(two_node_problem, mode, N):
    res = quiet_solve(two_node_problem, SolverConfig(N=N, mode=mode, grad_tol=1e-10))
    assert res.converged
    assert res.lam[0] - res.lam[1] == pytest.approx(2 * SINH1, rel=1e-9)
    assert res.x[0] == pytest.approx(1.0, rel=1e-9)


def test_two_node_odd_truncation_is_zero(two_node_problem):
    # rho_bar = 1 here: odd-length partial sums of the series cancel exactly
    res = quiet_solve(two_node_problem, SolverConfig(N=1, max_iter=3))
    assert res.termination == "max-iter"
    np.testing.assert_array_equal(res.steps[0][1], 0.0)


def test_sigma_warning_on_two_node(two_node_problem):
    with pytest.warns(RuntimeWarning, match="sigma"):
        solve(two_node_problem, SolverConfig(N=2))


def test_sigma_admissible_on_triangle(triangle_problem):
    ok, diag = sigma_admissible(triangle_problem, np.zeros(3), SolverConfig(N=1, sigma=0.1))
    assert ok and diag.sigma_bound(1) == pytest.approx(0.375)
    bad, _ = sigma_admissible(triangle_problem, np.zeros(3), SolverConfig(N=0, sigma=0.3))
    assert not bad


def test_balanced_zero_rates_converge_immediately(triangle):
    from distls.problem import ExpCapacityCost, FlowProblem
    p = FlowProblem(triangle, np.zeros(3), ExpCapacityCost())
    for mode in ("subgradient-fixed", "addn-centralized-ls", "addn-distributed-ls"):
        res = solve(p, SolverConfig(mode=mode))
        assert res.converged and len(res.trajectory) == 1
        assert res.trajectory[0].k == 0 and math.isnan(res.trajectory[0].alpha)
        assert res.iterations_to_unit_stepsize == 0


@pytest.mark.parametrize("alphas,expected", [
    ([1, 1, 1], 0),
    ([0.5, 1, 1, 1], 1),
    ([1, 0.5, 1, 1], 2),
    ([1, 1, 0.5], None),
    ([], 0),
    ([0.25, 0.5, 1, math.nan], 2),
])
def test_iterations_to_unit_stepsize_examples(alphas, expected):
    assert iterations_to_unit_stepsize(alphas) == expected


def test_initial_lambda():
    np.testing.assert_array_equal(initial_lambda(4), np.zeros(4))
    with pytest.raises(InvalidArgument):
        initial_lambda(4, "random")


@pytest.mark.parametrize("kw", [
    dict(mode="newton"), dict(grad_tol=0.0), dict(max_iter=0), dict(N=-1), dict(sigma=0.6),
    dict(mode="subgradient-fixed", fixed_step=0.0), dict(mode="addn-centralized-ls", use_simulator=True),
])
def test_config_validation(kw):
    with pytest.raises(InvalidArgument):
        SolverConfig(**kw)


def test_config_dict_round_trip():
    cfg = SolverConfig(N=3, seed=7)
    assert SolverConfig(**cfg.as_dict()) == cfg


@pytest.mark.parametrize("N", [1, 2, 3])
def test_simulator_matches_in_memory(N):
    p = random_problem(25, 100, 1)
    a = solve(p, SolverConfig(N=N))
    b = solve(p, SolverConfig(N=N, use_simulator=True))
    assert a.termination == b.termination == "converged"
    assert [r.k for r in a.trajectory] == [r.k for r in b.trajectory]
    np.testing.assert_array_equal([r.alpha for r in a.trajectory], [r.alpha for r in b.trajectory])
    qa = np.array([r.q for r in a.trajectory])
    qb = np.array([r.q for r in b.trajectory])
    np.testing.assert_allclose(qb, qa, rtol=1e-12)
    np.testing.assert_allclose(b.lam, a.lam, rtol=0, atol=1e-10)
    assert all(au.ok for au in b.audits)
    assert all(r.rounds > 0 and r.messages > 0 for r in b.trajectory)


@pytest.mark.parametrize("seed", range(3))
def test_strong_duality_at_convergence(seed):
    p = random_problem(25, 100, seed)
    res = solve(p, SolverConfig(N=2, grad_tol=1e-10))
    assert res.converged
    q = dual_value(p, res.lam)
    f = primal_objective(p, res.x)
    assert abs(q + f) <= 1e-8 * max(1.0, abs(f))
    assert np.linalg.norm(res.g) <= 1e-9


def test_dual_values_monotone_under_line_search():
    p = random_problem(25, 100, 5)
    for mode in ("addn-centralized-ls", "addn-distributed-ls"):
        q = [r.q for r in solve(p, SolverConfig(N=1, mode=mode)).trajectory]
        assert all(b <= a + 1e-12 * max(1.0, abs(a)) for a, b in zip(q, q[1:]))


@pytest.mark.parametrize("N", [1, 2, 3])
def test_decrease_bound_with_measured_constants(N):
    # q(lam + alpha d) - q(lam) <= -beta * alpha_hat * sigma * m * |g|^2 at every step
    p = random_problem(25, 100, 6)
    cfg = SolverConfig(N=N)
    res = solve(p, cfg)
    for (lam, d), rec in zip(res.steps, res.trajectory):
        g = dual_gradient(p, lam)
        sd = spectral_diagnostics(dual_hessian(p, lam), N, cfg.sigma)
        bound = -cfg.beta * sd.alpha_hat * cfg.sigma * sd.m * (g @ g)
        assert dual_increment(p, lam, d, rec.alpha) <= bound + 1e-12


def test_subgradient_mode_progresses():
    p = random_problem(10, 20, 0, rate_scale=1.0)
    res = solve(p, SolverConfig(mode="subgradient-fixed", fixed_step=0.05, max_iter=200))
    traj = res.trajectory
    assert res.termination in ("converged", "max-iter")
    assert traj[-1].grad_norm < traj[0].grad_norm
    assert all(r.alpha == 0.05 for r in traj[:-1])


def test_max_iter_termination_and_trajectory_shape():
    p = random_problem(25, 100, 0)
    res = solve(p, SolverConfig(N=1, max_iter=2))
    assert res.termination == "max-iter"
    assert [r.k for r in res.trajectory] == [0, 1, 2]
    assert math.isnan(res.trajectory[-1].alpha)
    assert len(res.steps) == 2 and len(res.outcomes) == 2
    assert IterationRecord.FIELDS[0] == "k" and len(res.trajectory[0].row()) == len(IterationRecord.FIELDS)


def test_line_search_failure_is_reported():
    p = random_problem(25, 100, 0)
    res = solve(p, SolverConfig(N=1, max_backtracks=0, rule="node-value"))
    assert res.termination == "line-search-failure"
    assert res.error is not None
    assert math.isnan(res.trajectory[-1].alpha)


def test_deterministic():
    p = random_problem(25, 100, 3)
    a = solve(p, SolverConfig(N=2))
    b = solve(p, SolverConfig(N=2))
    assert [r.row() for r in a.trajectory] == [r.row() for r in b.trajectory]
