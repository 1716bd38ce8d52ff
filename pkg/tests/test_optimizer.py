import math

import numpy as np
import pytest
from scipy.stats import chisquare

from zocubic.errors import CapabilityError, InvalidInputError
from zocubic.harness.config import ProblemSpec
from zocubic.harness.experiments import build_problem
from zocubic.optimizer import (CubicNewtonConfig, ZoSgdConfig, cubic_newton_run, draw_output_index,
                               evals_per_iteration, stationarity_report, theoretical_params, zo_sgd_run)
from zocubic.problems import CallableProblem, QuadraticProblem, iris_problem


def _half_norm(n):
    return QuadraticProblem(np.eye(n))


def test_zero_iterations_keeps_start():
    tr = cubic_newton_run(_half_norm(3), CubicNewtonConfig(T=0), np.ones(3))
    assert tr.iterations == 0 and tr.output_index is None
    assert len(tr.records) == 1 and tr.records[0].cum_evals == 0
    assert np.array_equal(tr.output_point, np.ones(3))


def test_quadratic_first_step_closed_form():
    x0 = np.array([3.0, -1.0, 2.0])
    tr = cubic_newton_run(_half_norm(3), CubicNewtonConfig(m1=1, m2=1, M=6, T=5, alpha=1.0), x0)
    # for F = |x|^2/2 the step is s = -t x0 with t (1 + |x0| t / 2) = 1 ... solved as a scalar root
    r = np.linalg.norm(x0)
    t = (-1 + math.sqrt(1 + 2 * r)) / r
    assert np.allclose(tr.iterates[1], x0 * (1 - t), atol=1e-6)
    losses = [rec.train_loss for rec in tr.records]
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert losses[-1] <= 1e-3 * losses[0]


@pytest.mark.parametrize("scheme", ["spherical", "gaussian"])
def test_per_iteration_cost_is_exact(scheme):
    p = iris_problem()
    cfg = CubicNewtonConfig(m1=3, m2=2, M=5, T=4, scheme=scheme)
    tr = cubic_newton_run(p, cfg, np.zeros(4))
    steps = np.diff([r.cum_evals for r in tr.records])
    expected = 2 * 4 * 3 + (4 * 5 * 2 if scheme == "spherical" else (2 * 5 + 1) * 2)
    assert evals_per_iteration(4, cfg) == expected
    assert np.all(steps == expected)


def test_budget_cap_stops_early():
    p = iris_problem()
    cfg = CubicNewtonConfig(T=10, budget=450)
    tr = cubic_newton_run(p, cfg, np.zeros(4))
    assert tr.iterations == 2 and tr.stopped_early
    tiny = cubic_newton_run(p, CubicNewtonConfig(T=10, budget=10), np.zeros(4))
    assert tiny.iterations == 0 and tiny.stopped_early and len(tiny.records) == 1


def test_runs_are_reproducible():
    p = iris_problem()
    a = cubic_newton_run(p, CubicNewtonConfig(T=5, seed=3))
    b = cubic_newton_run(p, CubicNewtonConfig(T=5, seed=3))
    assert a.records == b.records and a.output_index == b.output_index
    assert all(np.array_equal(x, y) for x, y in zip(a.iterates, b.iterates))
    c = cubic_newton_run(p, CubicNewtonConfig(T=5, seed=4))
    assert not np.array_equal(a.final_point, c.final_point)


def test_zo_sgd_examples():
    p = _half_norm(3)
    x0 = np.array([1.0, 2.0, -2.0])
    frozen = zo_sgd_run(p, ZoSgdConfig(gamma=0.0, T=4), x0)
    assert all(np.array_equal(x, x0) for x in frozen.iterates)
    tr = zo_sgd_run(p, ZoSgdConfig(gamma=0.1, T=5, batch=2), x0)
    norms = [np.linalg.norm(x) for x in tr.iterates]
    assert np.allclose(np.array(norms[1:]) / norms[:-1], 0.9, atol=1e-9)
    assert np.all(np.diff([r.cum_evals for r in tr.records]) == 2 * 3 * 2)


def test_config_validation():
    with pytest.raises(InvalidInputError):
        CubicNewtonConfig(m1=0)
    with pytest.raises(InvalidInputError):
        CubicNewtonConfig(scheme="other")
    with pytest.raises(InvalidInputError):
        ZoSgdConfig(delta=0)


def test_output_index_is_uniform():
    rng = np.random.default_rng(0)
    T = 12
    draws = np.array([draw_output_index(rng, T) for _ in range(10_000)])
    counts = np.bincount(draws, minlength=T)
    assert draws.min() >= 0 and draws.max() < T
    assert chisquare(counts).pvalue > 0.01
    assert draw_output_index(rng, 0) is None


def test_theoretical_parameter_examples():
    tp = theoretical_params(eta=0.1, beta=0.1, L2=1.0, gap=1.0, n=4, r=1)
    assert tp.config.m1 == 100
    assert tp.config.T == 32
    assert tp.config.M == 57
    assert tp.config.alpha == 1.0
    assert tp.config.m2 == 40
    assert tp.gradient_budget == 32 * 100 * 2 * 4
    assert tp.hessian_budget == 32 * 57 * 40 * 4
    with pytest.raises(InvalidInputError):
        theoretical_params(eta=1.0, beta=0.1, L2=1.0, gap=1.0, n=4, r=1)
    with pytest.raises(InvalidInputError):
        theoretical_params(eta=0.1, beta=0.0, L2=1.0, gap=1.0, n=4, r=1)


def test_variance_aware_batch_sizes_reported():
    tp = theoretical_params(0.1, 0.1, 2.0, 1.0, 4, 1, sigma1=0.5, sigma2=1.0, tau2=1.0)
    kappa = 0.1 / 800
    assert tp.m1_variance == math.ceil((0.5 / kappa) ** 2)
    assert tp.m2_variance == math.ceil(4 * math.sqrt(3) / (2 * 4.0 * kappa))


def test_stationarity_examples():
    grid = [1e-3, 1e-2, 0.04, 0.1]
    convex = QuadraticProblem(np.diag([1.0, 2.0]))
    rep = stationarity_report(convex, np.zeros(2), grid, L2=1.0)
    assert rep.qualifying == tuple(grid)

    # zero gradient with lambda_min = -0.3 and L2 = 1 needs sqrt(eta) >= 0.2
    indefinite = QuadraticProblem(np.diag([1.0, -0.3]))
    rep = stationarity_report(indefinite, np.zeros(2), grid, L2=1.0)
    assert rep.curvature_measure == pytest.approx(0.2)
    assert rep.smallest_eta == 0.04

    saddle = QuadraticProblem(np.diag([2.0, -2.0]))
    rep = stationarity_report(saddle, np.zeros(2), grid, L2=1.0)
    assert rep.gradient_measure == 0.0 and rep.smallest_eta is None

    with pytest.raises(CapabilityError):
        stationarity_report(CallableProblem(lambda x, xi: 0.0, 2), np.zeros(2), grid)


def test_median_gradient_norm_falls_as_budget_quadruples():
    p = build_problem(ProblemSpec(name="logistic", n=5, N=200))
    medians = []
    for T in (2, 8, 32):
        norms = [np.linalg.norm(p.full_gradient(cubic_newton_run(p, CubicNewtonConfig(T=T, seed=s),
                                                                 np.zeros(5)).output_point))
                 for s in range(20)]
        medians.append(np.median(norms))
    assert medians[0] > medians[1] > medians[2]
