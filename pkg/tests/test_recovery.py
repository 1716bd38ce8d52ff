import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zocubic.errors import InvalidInputError
from zocubic.estimators import DirectionSampler
from zocubic.problems import EvalCounter, LinearRegression, iris_problem
from zocubic.recovery import (RecoveryProblem, SolverConfig, estimate_hessian_batch, feasibility_tolerance,
                              nuclear_norm, recover, soft_threshold_spectrum)


def _rank_r(n, r, rng):
    W = rng.standard_normal((n, r))
    return W @ np.diag(rng.choice([-1.0, 1.0], r)) @ W.T


def _alternating_projection(S, y, n, r, iters=5000):
    """Oracle: alternate between the affine set {H : S vec(H) = y} and rank-r matrices."""
    P = np.linalg.pinv(S)
    H = (P @ y).reshape(n, n)
    for _ in range(iters):
        lam, Q = np.linalg.eigh(0.5 * (H + H.T))
        keep = np.argsort(-np.abs(lam))[:r]
        L = (Q[:, keep] * lam[keep]) @ Q[:, keep].T
        h = L.reshape(-1)
        H = (h - P @ (S @ h - y)).reshape(n, n)
    return 0.5 * (H + H.T)


def _cvx_nuclear(prob):
    cp = pytest.importorskip("cvxpy")
    X = cp.Variable((prob.n, prob.n), symmetric=True)
    meas = prob.sensing_matrix() @ cp.vec(X, order="C")
    cons = [cp.abs(meas - prob.values) <= prob.eps] if prob.eps > 0 else [meas == prob.values]
    value = cp.Problem(cp.Minimize(cp.normNuc(X)), cons).solve(solver=cp.CLARABEL)
    return float(value)


def test_soft_threshold_examples():
    A = np.diag([3.0, -1.0])
    assert np.allclose(soft_threshold_spectrum(A, 1.0), np.diag([2.0, 0.0]))
    B = np.random.default_rng(0).standard_normal((4, 4))
    B = B + B.T
    assert np.allclose(soft_threshold_spectrum(B, 0.0), B)
    assert np.allclose(soft_threshold_spectrum(B, 1 + np.abs(np.linalg.eigvalsh(B)).max()), 0)
    with pytest.raises(InvalidInputError):
        soft_threshold_spectrum(B, -1)


def test_zero_target_recovers_zero():
    s = DirectionSampler(4, 0)
    rec = recover(RecoveryProblem.gaussian(s.gaussian(3), np.zeros(3)))
    assert np.array_equal(rec.H, np.zeros((4, 4))) and rec.converged


def test_rank_one_gaussian_matches_alternating_projection():
    n, M = 5, 40
    H = np.zeros((n, n))
    H[0, 0] = 1.0
    prob = RecoveryProblem.gaussian(DirectionSampler(n, 1).gaussian(M), np.zeros(M))
    prob.values = prob.measure(H)
    rec = recover(prob)
    oracle = _alternating_projection(prob.sensing_matrix(), prob.values, n, 1)
    assert np.linalg.norm(oracle - H) <= 1e-5
    assert np.linalg.norm(rec.H - H) <= 1e-5
    assert rec.converged


def test_oversampled_spherical_matches_linear_solve():
    n = 10
    M = n * (n + 1) // 2
    rng = np.random.default_rng(2)
    H = _rank_r(n, 1, rng)
    s = DirectionSampler(n, 3)
    prob = RecoveryProblem.spherical(s.sphere(M), s.sphere(M), np.zeros(M))
    prob.values = prob.measure(H)
    # oracle: the symmetric unknowns are determined by the M equations
    iu = np.triu_indices(n)
    S = prob.sensing_matrix().reshape(M, n, n)
    cols = np.where(iu[0] == iu[1], S[:, iu[0], iu[1]], 2 * S[:, iu[0], iu[1]])
    sol = np.linalg.solve(cols, prob.values)
    oracle = np.zeros((n, n))
    oracle[iu] = sol
    oracle = oracle + np.triu(oracle, 1).T
    assert np.allclose(oracle, H, atol=1e-8)
    assert np.linalg.norm(recover(prob).H - H) <= 1e-6


@pytest.mark.parametrize("seed", range(4))
def test_nuclear_norm_matches_convex_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    M = int(rng.integers(n, n * (n + 1) // 2))
    H = _rank_r(n, 2, rng)
    s = DirectionSampler(n, seed)
    prob = RecoveryProblem.spherical(s.sphere(M), s.sphere(M), np.zeros(M))
    prob.values = prob.measure(H)
    rec = recover(prob)
    assert rec.nuclear_norm == pytest.approx(_cvx_nuclear(prob), rel=1e-4)


@pytest.mark.parametrize("seed", range(3))
def test_relaxed_program_feasible_and_minimal(seed):
    rng = np.random.default_rng(10 + seed)
    n, M = 4, 8
    s = DirectionSampler(n, seed)
    prob = RecoveryProblem.gaussian(s.gaussian(M), np.zeros(M), eps=0.05)
    prob.values = prob.measure(_rank_r(n, 1, rng)) + 0.01 * rng.standard_normal(M)
    rec = recover(prob)
    assert rec.converged
    assert rec.residual <= prob.eps + 1e-9
    assert rec.nuclear_norm == pytest.approx(_cvx_nuclear(prob), rel=1e-4)


def test_small_measurements_inside_slack_give_zero():
    prob = RecoveryProblem.gaussian(np.eye(3), [0.01, -0.02, 0.0], eps=0.05)
    rec = recover(prob)
    assert np.array_equal(rec.H, np.zeros((3, 3))) and rec.converged


def test_iteration_cap_reports_nonconvergence():
    n, M = 6, 8
    rng = np.random.default_rng(0)
    prob = RecoveryProblem.gaussian(DirectionSampler(n, 0).gaussian(M), np.zeros(M))
    prob.values = prob.measure(_rank_r(n, 3, rng))
    rec = recover(prob, SolverConfig(max_iter=3))
    assert not rec.converged and rec.iterations == 3
    assert np.array_equal(rec.H, rec.H.T)


def test_rejects_bad_problems():
    with pytest.raises(InvalidInputError):
        RecoveryProblem.gaussian(np.zeros((0, 3)), [])
    with pytest.raises(InvalidInputError):
        RecoveryProblem.spherical(np.eye(3), np.eye(3)[:2], [1, 2, 3])
    with pytest.raises(InvalidInputError):
        RecoveryProblem.gaussian(np.eye(3), [1, 2, 3], eps=-1)


@pytest.mark.parametrize("scheme", ["spherical", "gaussian"])
def test_linear_regression_batch_is_exact(scheme):
    rng = np.random.default_rng(5)
    Z = rng.standard_normal((12, 4))
    p = LinearRegression(Z, rng.standard_normal(12))
    batch = [1, 4, 4, 9]
    c = EvalCounter()
    M = 10
    rec = estimate_hessian_batch(p, rng.standard_normal(4), batch, M, 1e-3, scheme, DirectionSampler(4, 6), c)
    expected = np.mean([2 * np.outer(Z[i], Z[i]) for i in batch], axis=0)
    assert np.allclose(rec.H, expected, atol=1e-6)
    assert c.count == (4 * M * 4 if scheme == "spherical" else (2 * M + 1) * 4)
    assert len(rec.components) == 4 and rec.converged


def test_feasibility_tolerance_defaults():
    p = iris_problem()
    U = np.eye(4)
    assert feasibility_tolerance(p, "spherical", 1e-3, U, np.ones(4)) == pytest.approx(4 * p.lipschitz_hessian * 1e-3)
    A = 2 * np.eye(4)
    assert feasibility_tolerance(p, "gaussian", 1e-3, A, np.ones(4)) == pytest.approx(8 * p.lipschitz_hessian * 1e-3)
    lin = LinearRegression(np.eye(2), np.zeros(2))
    assert feasibility_tolerance(lin, "spherical", 1e-3, U, np.ones(4)) == 0.0


@pytest.mark.xfail(reason="the default slack 4*L2*delta shrinks the estimate by more than 1e-2 on logistic data",
                   strict=False)
def test_logistic_batch_close_to_analytic_mean():
    p = iris_problem()
    rng = np.random.default_rng(0)
    x = 0.5 * rng.standard_normal(4)
    batch = rng.integers(0, p.N, 5)
    rec = estimate_hessian_batch(p, x, batch, 8, 1e-3, "spherical", DirectionSampler(4, 0))
    expected = np.mean([p.analytic_hessian(x, i) for i in batch], axis=0)
    assert np.linalg.norm(rec.H - expected) <= 1e-2


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 6), seed=st.integers(0, 2**31), scale=st.floats(1e-3, 1e3))
def test_recovery_symmetric_and_scale_equivariant(n, seed, scale):
    rng = np.random.default_rng(seed)
    M = int(rng.integers(1, n * (n + 1) // 2 + 1))
    s = DirectionSampler(n, seed)
    prob = RecoveryProblem.spherical(s.sphere(M), s.sphere(M), rng.standard_normal(M))
    a = recover(prob)
    b = recover(RecoveryProblem.spherical(prob.U, prob.V, scale * prob.values))
    assert np.array_equal(a.H, a.H.T)
    assert np.allclose(scale * a.H, b.H, rtol=1e-6, atol=1e-6 * scale)
    assert a.nuclear_norm == pytest.approx(nuclear_norm(a.H))
