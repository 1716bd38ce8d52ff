"""Zeroth-order stochastic cubic Newton, the ZO-SGD baseline, and reporting helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cubic import CubicModel, solve_cubic
from .errors import CapabilityError, InvalidInputError
from .estimators import DirectionSampler, estimate_gradient
from .problems import EvalCounter, FiniteSumProblem
from .recovery import SCHEMES, SolverConfig, estimate_hessian_batch

__all__ = [
    "CubicNewtonConfig",
    "ZoSgdConfig",
    "IterationRecord",
    "RunTrace",
    "TheoreticalParameters",
    "StationarityReport",
    "cubic_newton_run",
    "zo_sgd_run",
    "theoretical_params",
    "stationarity_report",
    "evals_per_iteration",
    "draw_output_index",
]


@dataclass(frozen=True)
class CubicNewtonConfig:
    """Loop parameters; defaults are the small practical values used on iris."""

    m1: int = 5
    m2: int = 5
    M: int = 8
    delta: float = 1e-3
    alpha: float = 1.0
    T: int = 100
    seed: int = 0
    scheme: str = "spherical"
    budget: int | None = None

    def __post_init__(self):
        for name in ("m1", "m2", "M"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be a positive integer")
        if self.T < 0:
            raise InvalidInputError("T must be nonnegative")
        if not (self.delta > 0 and self.alpha > 0):
            raise InvalidInputError("delta and alpha must be positive")
        if self.scheme not in SCHEMES:
            raise InvalidInputError(f"scheme must be one of {SCHEMES}")
        if self.budget is not None and self.budget < 0:
            raise InvalidInputError("budget must be nonnegative")


@dataclass(frozen=True)
class ZoSgdConfig:
    batch: int = 5
    delta: float = 1e-3
    gamma: float = 0.1
    T: int = 100
    seed: int = 0
    budget: int | None = None

    def __post_init__(self):
        if self.batch < 1 or self.T < 0:
            raise InvalidInputError("batch must be positive and T nonnegative")
        if not self.delta > 0 or self.gamma < 0:
            raise InvalidInputError("delta must be positive and gamma nonnegative")
        if self.budget is not None and self.budget < 0:
            raise InvalidInputError("budget must be nonnegative")


@dataclass(frozen=True)
class IterationRecord:
    """State after ``t`` iterations.  Row 0 describes the starting point."""

    t: int
    cum_evals: int
    train_loss: float
    step_norm: float
    grad_norm_true: float
    recovery_ok: bool = True
    model_value: float = 0.0


@dataclass
class RunTrace:
    algo: str
    records: list[IterationRecord] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)
    output_index: int | None = None
    stopped_early: bool = False

    @property
    def output_point(self) -> np.ndarray:
        """``x_{R+1}``; the starting point when no iteration ran."""
        if self.output_index is None:
            return self.iterates[0]
        return self.iterates[self.output_index + 1]

    @property
    def final_point(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def iterations(self) -> int:
        return len(self.iterates) - 1


def evals_per_iteration(n: int, config: CubicNewtonConfig) -> int:
    """Exact evaluation cost of one cubic Newton iteration."""
    grad = 2 * n * config.m1
    if config.scheme == "spherical":
        return grad + 4 * config.M * config.m2
    return grad + (2 * config.M + 1) * config.m2


def draw_output_index(rng: np.random.Generator, T: int) -> int | None:
    """``R`` uniform on ``{0, ..., T-1}``, or None when ``T == 0``."""
    return None if T == 0 else int(rng.integers(0, T))


def _streams(seed):
    x0_ss, batch_ss, dir_ss, out_ss = np.random.SeedSequence(seed).spawn(4)
    return (np.random.default_rng(x0_ss), np.random.default_rng(batch_ss),
            np.random.default_rng(dir_ss), np.random.default_rng(out_ss))


def _grad_norm(problem, x):
    if not problem.has_derivatives:
        return float("nan")
    return float(np.linalg.norm(problem.full_gradient(x)))


def _start(problem, x0, rng_x0):
    if x0 is None:
        return rng_x0.standard_normal(problem.n)
    return problem._check_x(x0).copy()


def cubic_newton_run(problem: FiniteSumProblem, config: CubicNewtonConfig, x0=None,
                     solver: SolverConfig | None = None) -> RunTrace:
    """Zeroth-order stochastic cubic Newton.

    Each iteration estimates the gradient from ``m1`` sampled components by
    coordinate differences, recovers a Hessian estimate from ``M`` probes on
    each of ``m2`` fresh components, and moves to the global minimizer of the
    cubic model with regularizer ``alpha``.  The training loss in the trace is
    an unmetered full pass.  With a budget, the run stops before any
    iteration that would exceed it.  `x0` defaults to a standard normal draw
    from the seed.
    """
    rng_x0, rng_batch, rng_dir, rng_out = _streams(config.seed)
    x = _start(problem, x0, rng_x0)
    sampler = DirectionSampler(problem.n, rng_dir)
    counter = EvalCounter()
    cost = evals_per_iteration(problem.n, config)
    trace = RunTrace("cubic")
    trace.iterates.append(x.copy())
    trace.records.append(IterationRecord(0, 0, problem.loss(x), 0.0, _grad_norm(problem, x)))

    for t in range(config.T):
        if config.budget is not None and counter.count + cost > config.budget:
            trace.stopped_early = True
            break
        grad_batch = rng_batch.integers(0, problem.N, config.m1)
        hess_batch = rng_batch.integers(0, problem.N, config.m2)
        g = estimate_gradient(problem, x, grad_batch, config.delta, counter).g
        rec = estimate_hessian_batch(problem, x, hess_batch, config.M, config.delta,
                                     config.scheme, sampler, counter, solver)
        step = solve_cubic(CubicModel(g, rec.H, config.alpha))
        x = x + step.s
        trace.iterates.append(x.copy())
        trace.records.append(IterationRecord(
            t + 1, counter.count, problem.loss(x), step.norm, _grad_norm(problem, x),
            rec.converged, step.model_value))

    trace.output_index = draw_output_index(rng_out, trace.iterations)
    return trace


def zo_sgd_run(problem: FiniteSumProblem, config: ZoSgdConfig, x0=None) -> RunTrace:
    """ZO-SGD with the same coordinate-difference gradient estimator.

    ``x_{t+1} = x_t - gamma g_t``; each iteration costs ``2 n batch``.
    """
    rng_x0, rng_batch, _, rng_out = _streams(config.seed)
    x = _start(problem, x0, rng_x0)
    counter = EvalCounter()
    cost = 2 * problem.n * config.batch
    trace = RunTrace("zo-sgd")
    trace.iterates.append(x.copy())
    trace.records.append(IterationRecord(0, 0, problem.loss(x), 0.0, _grad_norm(problem, x)))
    for t in range(config.T):
        if config.budget is not None and counter.count + cost > config.budget:
            trace.stopped_early = True
            break
        batch = rng_batch.integers(0, problem.N, config.batch)
        g = estimate_gradient(problem, x, batch, config.delta, counter).g
        x_new = x - config.gamma * g
        step_norm = float(np.linalg.norm(x_new - x))
        x = x_new
        trace.iterates.append(x.copy())
        trace.records.append(IterationRecord(
            t + 1, counter.count, problem.loss(x), step_norm, _grad_norm(problem, x)))
    trace.output_index = draw_output_index(rng_out, trace.iterations)
    return trace


@dataclass(frozen=True)
class TheoreticalParameters:
    """Parameters that target an (eta, beta) second-order stationary point, hidden constants set to 1.

    ``m1_variance`` / ``m2_variance`` are the variance-aware batch sizes
    ``(sigma1/kappa)^2`` and ``n sqrt(tau2^4 + 2 sigma2^4) / (2 (L2 + alpha) kappa)``
    with ``kappa = eta/800``; they are reported alongside, not reconciled.
    """

    config: CubicNewtonConfig
    gradient_budget: int
    hessian_budget: int
    m1_variance: int | None = None
    m2_variance: int | None = None


def _ceil(x: float) -> int:
    # strip float noise such as 1/0.1**2 = 99.99999999999999
    return int(math.ceil(round(x, 9)))


def theoretical_params(eta: float, beta: float, L2: float, gap: float, n: int, r: int,
                       sigma1=None, sigma2=None, tau2=None, seed: int = 0,
                       scheme: str = "spherical") -> TheoreticalParameters:
    """Map accuracy ``eta`` and confidence ``beta`` to loop parameters.

    ``alpha = L2``, ``T = ceil(sqrt(L2) gap / eta^1.5)``, ``m1 = ceil(1/eta^2)``,
    ``m2 = ceil(n / (eta L2))``, ``M = ceil(n r^2 log n log(2 n T / (beta eta L2)))``,
    where ``gap = F(x0) - F*``.
    """
    if not (0 < eta < 1 and 0 < beta < 1):
        raise InvalidInputError("eta and beta must lie in (0, 1)")
    if not (L2 > 0 and gap > 0 and n >= 1 and r >= 1):
        raise InvalidInputError("L2 and the optimality gap must be positive; n, r >= 1")
    T = max(1, _ceil(math.sqrt(L2) * gap / eta**1.5))
    m1 = max(1, _ceil(1.0 / eta**2))
    m2 = max(1, _ceil(n / (eta * L2)))
    M = max(1, _ceil(n * r**2 * math.log(n) * math.log(2 * n * T / (beta * eta * L2))))
    config = CubicNewtonConfig(m1=m1, m2=m2, M=M, delta=1e-3, alpha=L2, T=T, seed=seed, scheme=scheme)
    per_probe = 4 if scheme == "spherical" else 2
    alpha = L2
    kappa = eta / 800.0
    m1_variance = None if sigma1 is None else max(1, _ceil((sigma1 / kappa) ** 2))
    m2_variance = None
    if sigma2 is not None and tau2 is not None:
        m2_variance = max(1, _ceil(n * math.sqrt(tau2**4 + 2 * sigma2**4) / (2 * (L2 + alpha) * kappa)))
    return TheoreticalParameters(config, T * m1 * 2 * n, T * M * m2 * per_probe, m1_variance, m2_variance)


@dataclass(frozen=True)
class StationarityReport:
    """Second-order stationarity measures of a point.

    ``gradient_measure = sqrt(||grad F||)`` and
    ``curvature_measure = -2 lambda_min(Hess F) / (3 sqrt(L2))``; the point
    qualifies at ``eta`` when ``sqrt(eta)`` is at least both.
    """

    grad_norm: float
    lambda_min: float
    gradient_measure: float
    curvature_measure: float
    qualifying: tuple
    smallest_eta: float | None


def stationarity_report(problem: FiniteSumProblem, x, eta_grid, L2: float | None = None) -> StationarityReport:
    if not problem.has_derivatives:
        raise CapabilityError("stationarity report needs analytic derivatives")
    L2 = problem.lipschitz_hessian if L2 is None else L2
    grad_norm = float(np.linalg.norm(problem.full_gradient(x)))
    lam_min = float(np.linalg.eigvalsh(problem.full_hessian(x))[0])
    if L2 is not None and L2 > 0:
        curvature = -2.0 * lam_min / (3.0 * math.sqrt(L2))
    else:
        curvature = 0.0 if lam_min >= 0 else math.inf
    needed = max(math.sqrt(grad_norm), curvature)
    qualifying = tuple(eta for eta in sorted(eta_grid) if math.sqrt(eta) >= needed)
    return StationarityReport(grad_norm, lam_min, math.sqrt(grad_norm), curvature,
                              qualifying, qualifying[0] if qualifying else None)
