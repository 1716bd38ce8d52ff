"""Independent reference computations shared by the tests."""

import numpy as np
from scipy.optimize import minimize


def cubic_value(g, H, alpha, s):
    s = np.atleast_2d(s)
    return s @ g + 0.5 * np.einsum("ki,ij,kj->k", s, H, s) + alpha / 6 * np.linalg.norm(s, axis=1) ** 3


def grid_cubic_minimum(g, H, alpha, points=None):
    """Global minimum of the cubic model by dense grid search plus local polishing.

    Any minimizer has ``||s|| <= 3||H||/alpha + sqrt(6||g||/alpha)`` because the
    model is positive beyond that radius, so the grid covers that box.
    """
    n = len(g)
    radius = 3 * np.linalg.norm(H, 2) / alpha + np.sqrt(6 * np.linalg.norm(g) / alpha) + 1e-3
    points = points or (401 if n == 2 else 81)
    axis = np.linspace(-radius, radius, points)
    grid = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    vals = cubic_value(g, H, alpha, grid)
    best = np.inf
    for i in np.argsort(vals)[:8]:
        res = minimize(lambda s: cubic_value(g, H, alpha, s)[0], grid[i], method="BFGS",
                       jac=lambda s: g + H @ s + 0.5 * alpha * np.linalg.norm(s) * s,
                       options={"gtol": 1e-10})
        best = min(best, res.fun, vals[i])
    return float(best)


def random_cubic_instance(rng, n, hard=False):
    """Random model data; ``hard=True`` forces g orthogonal to the bottom eigenvector."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = np.sort(rng.standard_normal(n) * 2)
    g = rng.standard_normal(n)
    alpha = float(rng.uniform(0.5, 3))
    if hard:
        lam[0] = -abs(lam[0]) - 1.0
        lam[1:] = np.maximum(lam[1:], lam[0] + 0.5)
        gt = Q.T @ g
        gt[0] = 0.0
        # keep the remaining gradient small so the step must leave the span of the others
        g = Q @ gt * 0.01
    H = (Q * lam) @ Q.T
    return g, 0.5 * (H + H.T), alpha
