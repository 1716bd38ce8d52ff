"""Low-rank symmetric Hessian recovery by nuclear-norm minimization.

Given scalar probes ``y_i ~ <H, A_i>`` with symmetric sensing matrices
``A_i = (u_i v_i' + v_i u_i')/2`` (spherical) or ``A_i = a_i a_i'`` (Gaussian),
:func:`recover` solves::

    minimize ||H||_*   subject to   |<H, A_i> - y_i| <= eps   for all i

over symmetric ``H`` with ADMM (fixed penalty ``rho``).  The nuclear-norm
block is the spectral soft-threshold; the constraint block is a least-squares
projection through the ``M x M`` Gram system of the sensing matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import lsq_linear

from .errors import InvalidInputError
from .estimators import DirectionSampler, measure_gaussian_batch, measure_spherical_batch
from .problems import EvalCounter, FiniteSumProblem

__all__ = [
    "RecoveryProblem",
    "SolverConfig",
    "RecoveredHessian",
    "recover",
    "soft_threshold_spectrum",
    "nuclear_norm",
    "estimate_hessian_batch",
    "feasibility_tolerance",
]

SCHEMES = ("spherical", "gaussian")


@dataclass
class RecoveryProblem:
    """Measurement data for one recovery.

    Use the :meth:`spherical` / :meth:`gaussian` constructors.  ``U`` and ``V``
    (spherical) or ``A`` (Gaussian) hold one sensing vector per row.
    """

    n: int
    scheme: str
    values: np.ndarray
    U: np.ndarray | None = None
    V: np.ndarray | None = None
    A: np.ndarray | None = None
    eps: float = 0.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidInputError(f"unknown scheme {self.scheme!r}")
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if self.values.size == 0:
            raise InvalidInputError("recovery needs at least one measurement")
        vecs = (self.U, self.V) if self.scheme == "spherical" else (self.A,)
        for v in vecs:
            if v is None or v.shape != (self.values.size, self.n):
                raise InvalidInputError(
                    f"sensing vectors must have shape {(self.values.size, self.n)}")
        if not self.eps >= 0:
            raise InvalidInputError("feasibility tolerance must be nonnegative")

    @classmethod
    def spherical(cls, U, V, values, eps: float = 0.0) -> "RecoveryProblem":
        U = np.atleast_2d(np.asarray(U, dtype=float))
        V = np.atleast_2d(np.asarray(V, dtype=float))
        return cls(U.shape[1], "spherical", values, U=U, V=V, eps=float(eps))

    @classmethod
    def gaussian(cls, A, values, eps: float = 0.0) -> "RecoveryProblem":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(A.shape[1], "gaussian", values, A=A, eps=float(eps))

    @property
    def M(self) -> int:
        return self.values.size

    def sensing_matrix(self) -> np.ndarray:
        """Rows are the flattened symmetric sensing matrices, shape ``(M, n*n)``."""
        if self.scheme == "spherical":
            S = 0.5 * (np.einsum("ki,kj->kij", self.U, self.V) + np.einsum("ki,kj->kij", self.V, self.U))
        else:
            S = np.einsum("ki,kj->kij", self.A, self.A)
        return S.reshape(self.M, -1)

    def measure(self, H) -> np.ndarray:
        """Exact measurements ``<H, A_i>`` of a symmetric matrix."""
        H = np.asarray(H, dtype=float)
        if self.scheme == "spherical":
            return np.einsum("ki,ij,kj->k", self.U, H, self.V)
        return np.einsum("ki,ij,kj->k", self.A, H, self.A)


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 1.0
    tol: float = 1e-7
    max_iter: int = 20000


@dataclass
class RecoveredHessian:
    """Recovered symmetric matrix and solver diagnostics.

    ``residual`` is ``max_i |<H, A_i> - y_i|``.  For a batch average,
    `components` holds the per-component recoveries and the diagnostics
    aggregate them (worst residual, total iterations, all-converged).
    """

    H: np.ndarray
    residual: float
    nuclear_norm: float
    iterations: int
    converged: bool
    eps: float = 0.0
    components: list = field(default_factory=list, repr=False)


def nuclear_norm(H) -> float:
    return float(np.sum(np.linalg.svd(H, compute_uv=False)))


def soft_threshold_spectrum(A, tau: float) -> np.ndarray:
    """Shrink the eigenvalues of symmetric `A` toward zero by `tau`.

    This is the proximal map of ``tau * ||.||_*`` on symmetric matrices.
    """
    if tau < 0:
        raise InvalidInputError("threshold must be nonnegative")
    A = np.asarray(A, dtype=float)
    lam, Q = np.linalg.eigh(0.5 * (A + A.T))
    lam = np.sign(lam) * np.maximum(np.abs(lam) - tau, 0.0)
    keep = lam != 0
    out = (Q[:, keep] * lam[keep]) @ Q[:, keep].T
    return 0.5 * (out + out.T)


def _sym(x, n):
    X = x.reshape(n, n)
    return 0.5 * (X + X.T)


def _gram_pinv(G):
    lam, Q = np.linalg.eigh(G)
    cutoff = max(lam.max(), 0.0) * G.shape[0] * np.finfo(float).eps * 10
    keep = lam > cutoff
    return (Q[:, keep] / lam[keep]) @ Q[:, keep].T


def recover(problem: RecoveryProblem, config: SolverConfig | None = None) -> RecoveredHessian:
    """Nuclear-norm recovery of a symmetric matrix from scalar probes.

    Iterates from the zero matrix, so when several minimizers exist the
    result is the solver's deterministic fixed point.  Reaching
    ``config.max_iter`` returns the best iterate with ``converged=False``.
    Feasibility is judged with a round-off allowance of
    ``1e-9 * max(1, ||y||_inf)`` on top of ``eps``.

    The program is positively homogeneous in ``(y, eps)``, so it is solved on
    measurements scaled to unit max-magnitude and the result scaled back;
    this keeps the fixed penalty meaningful whatever the curvature scale.
    """
    config = config or SolverConfig()
    n, y, eps = problem.n, problem.values, problem.eps
    S = problem.sensing_matrix()
    scale = float(np.max(np.abs(y)))
    slack = 1e-9 * max(1.0, scale)

    if scale <= eps:
        # the zero matrix is feasible and has the least possible nuclear norm
        Z = np.zeros((n, n))
        return RecoveredHessian(Z, scale, 0.0, 0, True, eps)

    Z, it, converged = _admm(S, y / scale, eps / scale, n, config)
    H = scale * 0.5 * (Z + Z.T)
    residual = float(np.max(np.abs(S @ H.reshape(-1) - y)))
    converged = converged and residual <= eps + slack
    return RecoveredHessian(H, residual, nuclear_norm(H), it, converged, eps)


def _shrink(A, tau):
    lam, Q = np.linalg.eigh(A)
    lam = np.sign(lam) * np.maximum(np.abs(lam) - tau, 0.0)
    return (Q * lam) @ Q.T


def _admm(S, y, eps, n, config):
    # hot loop: squared residual norms and in-place dual updates keep per-step overhead low
    rho = config.rho
    tau = 1.0 / rho
    G = S @ S.T
    ST = np.ascontiguousarray(S.T)
    stop2 = (config.tol * max(1.0, float(np.linalg.norm(y)))) ** 2
    Z = np.zeros((n, n))
    U = np.zeros((n, n))
    best = (np.inf, Z)
    converged = False
    it = 0

    if eps == 0.0:
        P = ST @ _gram_pinv(G)
        for it in range(1, config.max_iter + 1):
            X = _shrink(Z - U, tau)
            w = (X + U).reshape(-1)
            Z_prev = Z
            Z = _sym(w - P @ (S @ w - y), n)
            D = X - Z
            U += D
            E = Z - Z_prev
            r_pri, r_dual = np.vdot(D, D), rho * rho * np.vdot(E, E)
            score = max(r_pri, r_dual)
            if score < best[0]:
                best = (score, Z)
            if r_pri <= stop2 and r_dual <= stop2:
                converged = True
                break
        return (Z if converged else best[1]), it, converged

    lo, hi = y - eps, y + eps
    chol = cho_factor(np.eye(S.shape[0]) + G)
    V = np.zeros(S.shape[0])
    Sz = np.zeros(S.shape[0])
    for it in range(1, config.max_iter + 1):
        X = _shrink(Z - U, tau)
        w = np.minimum(np.maximum(Sz + V, lo), hi)
        Z_prev = Z
        b = (X + U).reshape(-1) + ST @ (w - V)
        # (I + S'S)^{-1} b by the Woodbury identity
        Z = _sym(b - ST @ cho_solve(chol, S @ b, check_finite=False), n)
        Sz_prev, Sz = Sz, S @ Z.reshape(-1)
        D, d = X - Z, Sz - w
        U += D
        V += d
        E, e = Z - Z_prev, Sz - Sz_prev
        r_pri = np.vdot(D, D) + d @ d
        r_dual = rho * rho * (np.vdot(E, E) + e @ e)
        score = max(r_pri, r_dual)
        if score < best[0]:
            best = (score, Z)
        if r_pri <= stop2 and r_dual <= stop2:
            converged = True
            break
    Z = best[1]
    if np.max(np.abs(S @ Z.reshape(-1) - y)) > eps:
        Z = _project_box(Z, S, G, lo, hi)
    return Z, it, converged


def _project_box(Z, S, G, lo, hi):
    """Nearest symmetric matrix to `Z` whose measurements lie in ``[lo, hi]``."""
    lam, Q = np.linalg.eigh(G)
    keep = lam > lam.max() * G.shape[0] * np.finfo(float).eps * 10
    R = (Q[:, keep] / np.sqrt(lam[keep])).T
    s0 = S @ Z.reshape(-1)
    # minimize (w - s0)' G^+ (w - s0) over the box, then pull back
    res = lsq_linear(R, R @ s0, bounds=(lo, hi), method="bvls")
    c = _gram_pinv(G) @ (res.x - s0)
    return _sym(Z.reshape(-1) + S.T @ c, Z.shape[0])


def feasibility_tolerance(problem: FiniteSumProblem, scheme: str, delta: float,
                          vectors: np.ndarray, values: np.ndarray) -> float:
    """Slack that covers the finite-difference error of the probes.

    ``4 L2 delta`` for spherical and ``L2 delta max ||a_i||^3`` for Gaussian
    probes when ``L2`` is known (zero for quadratics); ``1e-6 ||y||_inf``
    otherwise.
    """
    L2 = problem.lipschitz_hessian
    if L2 is None:
        return 1e-6 * float(np.max(np.abs(values)))
    if scheme == "spherical":
        return 4.0 * L2 * delta
    return L2 * delta * float(np.max(np.linalg.norm(vectors, axis=1)) ** 3)


def estimate_hessian_batch(problem: FiniteSumProblem, x, batch, M: int, delta: float,
                           scheme: str, sampler: DirectionSampler,
                           counter: EvalCounter | None = None,
                           solver: SolverConfig | None = None,
                           eps: float | None = None) -> RecoveredHessian:
    """Average of per-component recoveries over the Hessian mini-batch.

    Costs ``4 M len(batch)`` (spherical) or ``(2M + 1) len(batch)``
    (Gaussian) evaluations.  `eps` overrides :func:`feasibility_tolerance`.
    """
    if scheme not in SCHEMES:
        raise InvalidInputError(f"unknown scheme {scheme!r}")
    batch = np.atleast_1d(np.asarray(batch, dtype=int))
    if batch.size == 0 or M < 1:
        raise InvalidInputError("need a nonempty batch and M >= 1")
    parts = []
    for xi in batch:
        if scheme == "spherical":
            U, V = sampler.sphere(M), sampler.sphere(M)
            y = measure_spherical_batch(problem, x, xi, U, V, delta, counter)
            tol = feasibility_tolerance(problem, scheme, delta, U, y) if eps is None else eps
            rp = RecoveryProblem.spherical(U, V, y, tol)
        else:
            A = sampler.gaussian(M)
            base = problem.eval_component(x, xi, counter)
            q = measure_gaussian_batch(problem, x, xi, A, delta, base, counter)
            tol = feasibility_tolerance(problem, scheme, delta, A, q) if eps is None else eps
            rp = RecoveryProblem.gaussian(A, q, tol)
        parts.append(recover(rp, solver))
    H = np.mean([p.H for p in parts], axis=0)
    return RecoveredHessian(
        H=0.5 * (H + H.T),
        residual=max(p.residual for p in parts),
        nuclear_norm=nuclear_norm(H),
        iterations=sum(p.iterations for p in parts),
        converged=all(p.converged for p in parts),
        eps=max(p.eps for p in parts),
        components=parts,
    )
