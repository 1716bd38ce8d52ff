"""Zeroth-order cubic Newton against coordinate ZO-SGD on iris.

Both methods only query loss values.  The script runs a few seeds of each,
then prints mean training loss at shared evaluation budgets.

    python3 demos/iris_comparison.py [--seeds 3]
"""

import argparse

import numpy as np

from zocubic.harness.experiments import common_checkpoints, loss_at_budget
from zocubic.optimizer import CubicNewtonConfig, ZoSgdConfig, cubic_newton_run, zo_sgd_run
from zocubic.problems import iris_problem


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--gamma", type=float, default=0.001)
    args = ap.parse_args()

    p = iris_problem()
    x0 = np.zeros(p.n)
    cubic = [cubic_newton_run(p, CubicNewtonConfig(T=100, seed=s), x0) for s in range(args.seeds)]
    sgd = [zo_sgd_run(p, ZoSgdConfig(gamma=args.gamma, T=500, seed=s), x0) for s in range(args.seeds)]

    print(f"iris: N={p.N}, n={p.n}, F(x0)={cubic[0].records[0].train_loss:.4f}")
    print(f"{'evals':>7} {'cubic':>9} {'zo-sgd':>9}")
    for b in common_checkpoints(cubic + sgd, 2000):
        c = np.mean([loss_at_budget(t, b) for t in cubic])
        z = np.mean([loss_at_budget(t, b) for t in sgd])
        print(f"{b:>7} {c:>9.4f} {z:>9.4f}")


if __name__ == "__main__":
    main()
