"""Global minimization of the cubic-regularized model.

The model is ``m(s) = <g, s> + 0.5 <s, H s> + (alpha/6) ||s||^3`` with
symmetric (possibly indefinite) ``H``.  Its global minimizer satisfies

    g + H s + (alpha/2) ||s|| s = 0,    H + (alpha/2) ||s|| I  >= 0,

so with ``H = Q diag(lam) Q'`` the step is ``s = -(H + (alpha rho/2) I)^{-1} g``
where ``rho = ||s||`` is the root of the secular equation
``||(lam + alpha rho/2)^{-1} Q'g|| = rho`` on ``rho >= max(0, -2 lam_min/alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = ["CubicModel", "CubicStep", "Certificate", "solve_cubic", "check_optimality"]

HARD_CASE_TOL = 1e-10


@dataclass(frozen=True)
class CubicModel:
    g: np.ndarray
    H: np.ndarray
    alpha: float

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float).reshape(-1)
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        if H.shape != (g.size, g.size):
            raise InvalidInputError(f"H has shape {H.shape}, expected {(g.size, g.size)}")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
            raise InvalidInputError("model data must be finite")
        if not self.alpha > 0:
            raise InvalidInputError(f"alpha must be positive, got {self.alpha}")
        scale = max(1.0, float(np.max(np.abs(H))))
        if np.max(np.abs(H - H.T)) > 1e-9 * scale:
            raise InvalidInputError("H must be symmetric")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "H", 0.5 * (H + H.T))

    def value(self, s) -> float:
        s = np.asarray(s, dtype=float)
        return float(self.g @ s + 0.5 * s @ self.H @ s + self.alpha / 6.0 * np.linalg.norm(s) ** 3)


@dataclass(frozen=True)
class CubicStep:
    s: np.ndarray
    model_value: float
    residual: float
    curvature_slack: float
    hard_case: bool = False

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.s))


@dataclass(frozen=True)
class Certificate:
    residual: float
    slack: float
    passed: bool


def check_optimality(model: CubicModel, s, tol: float = 1e-8) -> Certificate:
    """First-order residual and curvature slack of a candidate step.

    Passes iff ``||g + H s + (alpha/2)||s|| s|| <= tol`` and
    ``lambda_min(H) + (alpha/2)||s|| >= -tol``.
    """
    s = np.asarray(s, dtype=float)
    r = np.linalg.norm(s)
    residual = float(np.linalg.norm(model.g + model.H @ s + 0.5 * model.alpha * r * s))
    slack = float(np.linalg.eigvalsh(model.H)[0] + 0.5 * model.alpha * r)
    return Certificate(residual, slack, residual <= tol and slack >= -tol)


def _lex_larger(a, b):
    for x, y in zip(a, b):
        if x != y:
            return x > y
    return False


def solve_cubic(model: CubicModel, tol: float = 1e-12, max_iter: int = 500) -> CubicStep:
    """Global minimizer of the cubic model.

    The radius is found by safeguarded Newton on the secular function, with
    bisection whenever a Newton step leaves the bracket.  In the hard case
    (``g`` has no component along the bottom eigenspace and the remaining
    step is too short) the step is completed along a bottom eigenvector;
    of the two signs, the lexicographically larger step is returned.
    """
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    g, H, alpha = model.g, model.H, model.alpha
    lam, Q = np.linalg.eigh(H)
    gt = Q.T @ g
    gnorm = float(np.linalg.norm(g))
    lam_min = float(lam[0])
    rho_lo = max(0.0, -2.0 * lam_min / alpha)

    if gnorm == 0.0 and lam_min >= 0:
        s = np.zeros_like(g)
        return CubicStep(s, 0.0, 0.0, lam_min, False)

    spread = max(1.0, float(np.max(np.abs(lam))))
    bottom = lam <= lam_min + 1e-12 * spread
    # eigenvalue gaps above the bottom; exact zeros on the bottom eigenspace
    gap = np.where(bottom, 0.0, lam - lam_min)
    t_lo = max(lam_min, 0.0)
    hard = False
    if np.linalg.norm(gt[bottom]) <= HARD_CASE_TOL * gnorm:
        # bottom components vanish: shift the rest to rho_lo and see if the step is too short
        partial = np.zeros_like(gt)
        partial[~bottom] = -gt[~bottom] / (gap[~bottom] + t_lo)
        hard = float(np.linalg.norm(partial)) <= rho_lo

    if hard:
        theta = math.sqrt(max(rho_lo**2 - float(partial @ partial), 0.0))
        e = np.zeros_like(gt)
        e[np.flatnonzero(bottom)[0]] = 1.0
        s_plus = Q @ (partial + theta * e)
        s_minus = Q @ (partial - theta * e)
        s = s_minus if _lex_larger(s_minus, s_plus) else s_plus
    else:
        t = _secular_root(gap, gt, alpha, lam_min, t_lo, gnorm, tol, max_iter)
        s = -Q @ (gt / (gap + t))

    cert = check_optimality(model, s)
    return CubicStep(s, model.value(s), cert.residual, cert.slack, hard)


def _secular_root(gap, gt, alpha, lam_min, t_lo, gnorm, tol, max_iter):
    """Solve the secular equation for the shift ``t = lam_min + alpha rho / 2``.

    With ``s(t) = -gt / (gap + t)`` and ``rho(t) = 2 (t - lam_min) / alpha``,
    ``phi(t) = ||s(t)|| - rho(t)`` is strictly decreasing on ``t > t_lo``.
    Working in ``t`` rather than ``rho`` keeps full relative precision when
    the root sits just above the bottom eigenvalue.  Newton steps are taken on
    ``psi = 1/||s|| - 1/rho`` and replaced by bisection when they leave the
    bracket.
    """
    rho_hi = math.sqrt(2.0 * gnorm / alpha) + max(0.0, -2.0 * lam_min / alpha) + 1.0
    lo, hi = t_lo, lam_min + 0.5 * alpha * rho_hi
    t = hi
    for _ in range(max_iter):
        d = gap + t
        w = gt / d
        ns = float(np.linalg.norm(w))
        rho = 2.0 * (t - lam_min) / alpha
        phi = ns - rho
        if abs(phi) <= tol * (1.0 + rho):
            return t
        if phi > 0:
            lo = t
        else:
            hi = t
        cand = np.nan
        if ns > 0 and rho > 0:
            dns = -float(np.sum(w * w / d)) / ns
            dpsi = -dns / ns**2 + (2.0 / alpha) / rho**2
            cand = t - (1.0 / ns - 1.0 / rho) / dpsi
        if not lo < cand < hi:
            cand = lo + 0.5 * (hi - lo)
        if cand == t or cand <= lo or cand >= hi:
            return t
        t = cand
    return t
