"""Zeroth-order gradient estimation and scalar Hessian probes.

Three finite-difference primitives, all metered through an
:class:`~zocubic.problems.EvalCounter`:

* coordinate central differences averaged over a mini-batch (gradient);
* the four-point bilinear probe ``u' H v`` along unit directions;
* the three-point quadratic-form probe ``a' H a`` along Gaussian directions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .problems import EvalCounter, FiniteSumProblem

__all__ = [
    "DirectionSampler",
    "SphericalMeasurement",
    "GaussianMeasurement",
    "GradientEstimate",
    "sample_sphere",
    "estimate_gradient",
    "measure_spherical",
    "measure_spherical_batch",
    "measure_gaussian",
    "measure_gaussian_batch",
]


class DirectionSampler:
    """Seeded source of probe directions in ``R^n``.

    Spherical draws are normalized standard Gaussians, which are exactly
    uniform on the unit sphere.  Independent child streams for concurrent
    work come from :meth:`spawn`.
    """

    def __init__(self, n: int, seed=None):
        if n < 1:
            raise InvalidInputError(f"dimension must be at least 1, got {n}")
        self.n = int(n)
        if isinstance(seed, np.random.Generator):
            self.rng = seed
        else:
            self.rng = np.random.default_rng(seed)

    def sphere(self, size: int | None = None) -> np.ndarray:
        shape = (self.n,) if size is None else (size, self.n)
        g = self.rng.standard_normal(shape)
        norms = np.linalg.norm(g, axis=-1, keepdims=True)
        # a zero Gaussian draw has probability zero; redraw rather than divide by it
        while np.any(norms == 0):
            g = self.rng.standard_normal(shape)
            norms = np.linalg.norm(g, axis=-1, keepdims=True)
        return g / norms

    def gaussian(self, size: int | None = None) -> np.ndarray:
        shape = (self.n,) if size is None else (size, self.n)
        return self.rng.standard_normal(shape)

    def spawn(self, k: int) -> list["DirectionSampler"]:
        return [DirectionSampler(self.n, g) for g in self.rng.spawn(k)]


def sample_sphere(sampler: DirectionSampler) -> np.ndarray:
    """One direction uniform on the unit sphere ``S^{n-1}``."""
    return sampler.sphere()


@dataclass(frozen=True)
class GradientEstimate:
    g: np.ndarray
    delta: float
    m1: int


@dataclass(frozen=True)
class SphericalMeasurement:
    """Probe value ``y ~ u' H v``; the full matrix-valued estimate is ``n^2 y u v'``."""

    u: np.ndarray
    v: np.ndarray
    value: float

    def matrix(self) -> np.ndarray:
        n = self.u.shape[0]
        return n * n * self.value * np.outer(self.u, self.v)


@dataclass(frozen=True)
class GaussianMeasurement:
    """Probe value ``q ~ a' H a``."""

    a: np.ndarray
    value: float


def _check_delta(delta):
    if not delta > 0:
        raise InvalidInputError(f"finite-difference step must be positive, got {delta}")


def estimate_gradient(problem: FiniteSumProblem, x, batch, delta: float,
                      counter: EvalCounter | None = None) -> GradientEstimate:
    """Coordinate central-difference gradient averaged over `batch`.

    ``g_j = mean_i [f(x + delta e_j; xi_i) - f(x - delta e_j; xi_i)] / (2 delta)``.
    Costs exactly ``2 n len(batch)`` evaluations.
    """
    _check_delta(delta)
    batch = np.atleast_1d(np.asarray(batch, dtype=int))
    if batch.size == 0:
        raise InvalidInputError("gradient batch must be nonempty")
    x = problem._check_x(x)
    n = problem.n
    step = delta * np.eye(n)
    points = np.vstack([x + step, x - step])
    g = np.zeros(n)
    for xi in batch:
        vals = problem.eval_points(points, xi, counter)
        g += (vals[:n] - vals[n:]) / (2.0 * delta)
    return GradientEstimate(g / batch.size, float(delta), int(batch.size))


def _check_unit(vecs, name):
    norms = np.linalg.norm(np.atleast_2d(vecs), axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise InvalidInputError(f"{name} must have unit norm (got norms {norms})")


def measure_spherical_batch(problem: FiniteSumProblem, x, xi: int, U, V, delta: float,
                            counter: EvalCounter | None = None) -> np.ndarray:
    """Four-point probe values for each row pair ``(U[i], V[i])``; costs ``4 M``."""
    _check_delta(delta)
    U = np.atleast_2d(np.asarray(U, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if U.shape != V.shape:
        raise InvalidInputError("U and V must have the same shape")
    _check_unit(U, "u")
    _check_unit(V, "v")
    x = problem._check_x(x)
    du, dv = delta * U, delta * V
    pts = np.vstack([x + dv + du, x - dv + du, x + dv - du, x - dv - du])
    vals = problem.eval_points(pts, xi, counter).reshape(4, -1)
    return (vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * delta**2)


def measure_spherical(problem: FiniteSumProblem, x, xi: int, u, v, delta: float,
                      counter: EvalCounter | None = None) -> SphericalMeasurement:
    """Single four-point probe of ``u' Hess f(x; xi) v``; costs 4 evaluations."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    y = measure_spherical_batch(problem, x, xi, u[None], v[None], delta, counter)[0]
    return SphericalMeasurement(u, v, float(y))


def measure_gaussian_batch(problem: FiniteSumProblem, x, xi: int, A, delta: float,
                           base_value: float, counter: EvalCounter | None = None) -> np.ndarray:
    """Three-point probe values for each row of `A`; costs ``2 M``.

    `base_value` is ``f(x; xi)``, evaluated once by the caller and shared
    across all probes of the component.
    """
    _check_delta(delta)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    x = problem._check_x(x)
    pts = np.vstack([x + delta * A, x - delta * A])
    vals = problem.eval_points(pts, xi, counter).reshape(2, -1)
    return (vals[0] + vals[1] - 2.0 * base_value) / delta**2


def measure_gaussian(problem: FiniteSumProblem, x, xi: int, a, delta: float, base_value: float,
                     counter: EvalCounter | None = None) -> GaussianMeasurement:
    """Single probe of ``a' Hess f(x; xi) a``; costs 2 evaluations."""
    a = np.asarray(a, dtype=float)
    q = measure_gaussian_batch(problem, x, xi, a[None], delta, base_value, counter)[0]
    return GaussianMeasurement(a, float(q))
