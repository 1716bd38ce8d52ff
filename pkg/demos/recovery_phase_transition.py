"""Low-rank Hessian recovery as the number of probes grows.

Recovers random rank-one 20 x 20 targets from Gaussian quadratic probes
``a^T H a`` and prints the success rate per probe count.  Recovery flips from
failing to exact well before the ``n(n+1)/2 = 210`` probes needed to pin down
a general symmetric matrix.

    python3 demos/recovery_phase_transition.py [--seeds 10]
"""

import argparse

from zocubic.harness.experiments import bench_trial


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()

    n = args.n
    print(f"n={n}, rank 1, gaussian probes, {args.seeds} targets per row")
    print(f"{'M':>5} {'success':>8} {'median rel err':>15}")
    for M in (n, 2 * n, 3 * n, 4 * n, 6 * n):
        rows = [bench_trial(n, 1, M, "gaussian", s, timing=False) for s in range(args.seeds)]
        errs = sorted(r["rel_error"] for r in rows)
        rate = sum(r["success"] for r in rows) / len(rows)
        print(f"{M:>5} {rate:>8.2f} {errs[len(errs) // 2]:>15.2e}")


if __name__ == "__main__":
    main()
