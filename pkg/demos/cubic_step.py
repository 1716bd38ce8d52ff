"""The cubic-regularized step on small models, including the hard case.

For each model the script prints the step, its model value, and the
optimality certificate ``g + (H + alpha/2 |s| I) s = 0`` with
``H + alpha/2 |s| I`` positive semidefinite.

    python3 demos/cubic_step.py
"""

import numpy as np

from zocubic.cubic import CubicModel, check_optimality, solve_cubic

MODELS = {
    "convex": (np.array([1.0, -2.0]), np.diag([2.0, 1.0])),
    "saddle": (np.array([0.5, 0.5]), np.diag([1.0, -1.0])),
    # gradient orthogonal to the negative-curvature direction
    "hard case": (np.array([1.0, 0.0]), np.diag([1.0, -2.0])),
    "zero gradient": (np.zeros(2), np.diag([3.0, -0.5])),
}


def main():
    alpha = 1.0
    for name, (g, H) in MODELS.items():
        model = CubicModel(g, H, alpha)
        step = solve_cubic(model)
        cert = check_optimality(model, step.s)
        print(f"{name:>13}: s={np.array2string(step.s, precision=4)}  m(s)={step.model_value:+.5f}  "
              f"|s|={step.norm:.4f}  hard={step.hard_case}  residual={cert.residual:.1e}  "
              f"slack={cert.slack:+.3f}")


if __name__ == "__main__":
    main()
