"""Experiment orchestration: recovery benchmarks, optimizer runs, comparisons.

Each ``run_*`` function returns plain row data; :func:`write_csv` emits it
with shortest round-trip float formatting so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from ..estimators import DirectionSampler
from ..optimizer import (RunTrace, cubic_newton_run, stationarity_report, zo_sgd_run)
from ..problems import (CsvSchema, LogisticRegression, QuadraticProblem, iris_problem, load_csv)
from ..recovery import SCHEMES, RecoveryProblem, recover
from .config import RunConfig

log = logging.getLogger("zocubic")

__all__ = [
    "TRIAL_COLUMNS", "SUMMARY_COLUMNS", "TRACE_COLUMNS", "CHECKPOINT_COLUMNS", "PLOT_COLUMNS",
    "SummaryRow", "build_problem", "initial_point", "bench_trial", "run_recover_bench",
    "run_optimize", "run_compare", "loss_at_budget", "common_checkpoints", "summarize",
    "trace_rows", "write_csv",
]

TRIAL_COLUMNS = ("n", "r", "M", "scheme", "seed", "status", "rel_error", "converged", "success", "wall_ms")
SUMMARY_COLUMNS = ("n", "r", "M", "scheme", "status", "trials", "successes", "success_rate", "converged_rate")
TRACE_COLUMNS = ("run_id", "algo", "t", "cum_evals", "train_loss", "step_norm", "grad_norm_true", "recovery_ok")
RUN_COLUMNS = ("run_id", "algo", "seed", "iterations", "stopped_early", "output_index",
               "final_loss", "output_loss", "output_grad_norm", "output_lambda_min", "smallest_eta")
CHECKPOINT_COLUMNS = ("algo", "budget", "mean_loss", "min_loss", "max_loss", "runs")
PLOT_COLUMNS = ("algo", "cum_evals", "mean_loss", "min_loss", "max_loss")


# -- problems --------------------------------------------------------------------

def build_problem(spec):
    """Instantiate the problem described by a :class:`ProblemSpec`."""
    if spec.name == "iris":
        return iris_problem(spec.path, spec.features, spec.classes, spec.standardize)
    if spec.name == "csv":
        schema = CsvSchema(label=spec.label, features=spec.features, classes=spec.classes)
        return LogisticRegression.from_records(load_csv(spec.path, schema), standardize=spec.standardize)
    rng = np.random.default_rng(spec.data_seed)
    if spec.name == "logistic":
        # labels drawn from the model itself keep the data non-separable, so a finite optimum exists
        Z = rng.standard_normal((spec.N, spec.n))
        w = rng.standard_normal(spec.n)
        y = np.where(rng.random(spec.N) < expit(Z @ w), 1.0, -1.0)
        return LogisticRegression(Z, y)
    return QuadraticProblem(np.eye(spec.n))


def initial_point(problem, spec, seed: int) -> np.ndarray:
    if spec.x0 == "zeros":
        return np.zeros(problem.n)
    return np.random.default_rng([seed, 0x5EED]).standard_normal(problem.n)


# -- recovery benchmark ------------------------------------------------------------

def _target(n, r, seed):
    rng = np.random.default_rng([seed, n, r])
    W = rng.standard_normal((n, r))
    signs = rng.choice([-1.0, 1.0], size=r)
    H = (W * signs) @ W.T
    norm = np.linalg.norm(H)
    return H / norm if norm > 0 else H


def bench_trial(n: int, r: int, M: int, scheme: str, seed: int,
                threshold: float = 1e-4, timing: bool = True) -> dict:
    """Recover a random rank-`r` symmetric target from `M` noiseless probes.

    The target depends only on ``(seed, n, r)``, so cells that differ in `M`
    or scheme see the same matrices.  ``rel_error`` is relative in Frobenius
    norm, or absolute for the zero target.
    """
    row = dict(n=n, r=r, M=M, scheme=scheme, seed=seed)
    if r > n or r < 0 or M < 1:
        log.warning("skipping infeasible cell n=%d r=%d M=%d", n, r, M)
        return {**row, "status": "skipped", "rel_error": math.nan, "converged": False,
                "success": False, "wall_ms": None}
    H = _target(n, r, seed)
    sampler = DirectionSampler(n, np.random.default_rng([seed, n, r, M, SCHEMES.index(scheme)]))
    if scheme == "spherical":
        U, V = sampler.sphere(M), sampler.sphere(M)
        prob = RecoveryProblem.spherical(U, V, np.zeros(M))
    else:
        prob = RecoveryProblem.gaussian(sampler.gaussian(M), np.zeros(M))
    prob.values = prob.measure(H)
    start = time.perf_counter()
    rec = recover(prob)
    wall = (time.perf_counter() - start) * 1e3
    ref = np.linalg.norm(H)
    err = float(np.linalg.norm(rec.H - H) / (ref if ref > 0 else 1.0))
    return {**row, "status": "ok", "rel_error": err, "converged": rec.converged,
            "success": err <= threshold, "wall_ms": wall if timing else None}


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def run_recover_bench(cfg: RunConfig) -> tuple[list[dict], list[dict]]:
    """Trial rows and per-cell success-rate rows, in (cell, seed) order."""
    g = cfg.bench
    cells = [(n, r, M, s) for n in g.n for r in g.r for M in g.M for s in g.schemes]
    jobs = [(cell, seed) for cell in cells for seed in cfg.seeds]
    trials = _map(lambda job: bench_trial(*job[0], job[1], g.threshold, g.timing), jobs, cfg.workers)
    summary = []
    for i, (n, r, M, s) in enumerate(cells):
        rows = [t for t in trials[i * len(cfg.seeds):(i + 1) * len(cfg.seeds)] if t["status"] == "ok"]
        k = len(rows)
        summary.append(dict(
            n=n, r=r, M=M, scheme=s, status="ok" if k else "skipped", trials=k,
            successes=sum(t["success"] for t in rows),
            success_rate=sum(t["success"] for t in rows) / k if k else math.nan,
            converged_rate=sum(t["converged"] for t in rows) / k if k else math.nan))
    return trials, summary


# -- optimizer runs ------------------------------------------------------------

def trace_rows(run_id: str, trace: RunTrace) -> list[dict]:
    return [dict(run_id=run_id, algo=trace.algo, t=r.t, cum_evals=r.cum_evals, train_loss=r.train_loss,
                 step_norm=r.step_norm, grad_norm_true=r.grad_norm_true, recovery_ok=r.recovery_ok)
            for r in trace.records]


def _run_row(run_id, algo, seed, trace, problem, eta_grid):
    row = dict(run_id=run_id, algo=algo, seed=seed, iterations=trace.iterations,
               stopped_early=trace.stopped_early, output_index=trace.output_index,
               final_loss=trace.records[-1].train_loss, output_loss=problem.loss(trace.output_point),
               output_grad_norm=math.nan, output_lambda_min=math.nan, smallest_eta=None)
    if problem.has_derivatives:
        rep = stationarity_report(problem, trace.output_point, eta_grid)
        row.update(output_grad_norm=rep.grad_norm, output_lambda_min=rep.lambda_min,
                   smallest_eta=rep.smallest_eta)
    return row


def _algos(cfg):
    algos = [("cubic", None)]
    if cfg.experiment == "compare":
        algos += [(f"zo-sgd-g{g!r}", g) for g in cfg.gammas]
    return algos


def _execute(cfg: RunConfig, problem):
    jobs = [(name, gamma, seed) for name, gamma in _algos(cfg) for seed in cfg.seeds]

    def one(job):
        name, gamma, seed = job
        x0 = initial_point(problem, cfg.problem, seed)
        if gamma is None:
            tr = cubic_newton_run(problem, replace(cfg.cubic, seed=seed), x0)
        else:
            tr = zo_sgd_run(problem, replace(cfg.zosgd, seed=seed, gamma=gamma), x0)
        tr.algo = name
        log.info("%s seed %d: %d iterations, final loss %r", name, seed, tr.iterations,
                 tr.records[-1].train_loss)
        return tr

    return jobs, _map(one, jobs, cfg.workers)


def run_optimize(cfg: RunConfig, problem=None) -> dict:
    """Cubic Newton over all seeds: traces, per-run stationarity rows."""
    problem = problem or build_problem(cfg.problem)
    jobs, traces = _execute(cfg, problem)
    runs, rows = [], []
    for (name, _, seed), tr in zip(jobs, traces):
        run_id = f"{name}-s{seed}"
        rows += trace_rows(run_id, tr)
        runs.append(_run_row(run_id, name, seed, tr, problem, cfg.eta_grid))
    return {"traces": rows, "runs": runs, "trace_objects": traces}


@dataclass(frozen=True)
class SummaryRow:
    """Loss across seeds at one shared budget checkpoint."""

    algo: str
    budget: int
    mean_loss: float
    min_loss: float
    max_loss: float
    runs: int

    def as_dict(self) -> dict:
        return dict(algo=self.algo, budget=self.budget, mean_loss=self.mean_loss,
                    min_loss=self.min_loss, max_loss=self.max_loss, runs=self.runs)


def loss_at_budget(trace: RunTrace, budget: int) -> float:
    """Training loss of the last trace row whose cumulative cost is at most `budget`."""
    best = None
    for rec in trace.records:
        if rec.cum_evals > budget:
            break
        best = rec
    if best is None:
        raise ValueError(f"no trace row within budget {budget}")
    return best.train_loss


def common_checkpoints(traces, every: int) -> list[int]:
    """Multiples of `every` up to the final budget that every trace reached, plus that budget."""
    final = min(tr.records[-1].cum_evals for tr in traces)
    points = list(range(every, final + 1, every))
    if not points or points[-1] != final:
        points.append(final)
    return points


def summarize(algo: str, traces, budget: int) -> SummaryRow:
    losses = np.array([loss_at_budget(tr, budget) for tr in traces])
    return SummaryRow(algo, int(budget), float(losses.mean()), float(losses.min()),
                      float(losses.max()), len(losses))


def run_compare(cfg: RunConfig, problem=None) -> dict:
    """All algorithms over all seeds, summarized at shared budget checkpoints."""
    problem = problem or build_problem(cfg.problem)
    jobs, traces = _execute(cfg, problem)
    by_algo: dict[str, list] = {}
    rows, runs = [], []
    for (name, _, seed), tr in zip(jobs, traces):
        run_id = f"{name}-s{seed}"
        rows += trace_rows(run_id, tr)
        runs.append(_run_row(run_id, name, seed, tr, problem, cfg.eta_grid))
        by_algo.setdefault(name, []).append(tr)

    checkpoints = common_checkpoints(traces, cfg.checkpoint_every)
    summary = [summarize(a, trs, b) for a, trs in by_algo.items() for b in checkpoints]
    plot = []
    for a, trs in by_algo.items():
        budgets = sorted({rec.cum_evals for tr in trs for rec in tr.records})
        plot += [summarize(a, trs, b) for b in budgets]
    plot_rows = [dict(algo=s.algo, cum_evals=s.budget, mean_loss=s.mean_loss,
                      min_loss=s.min_loss, max_loss=s.max_loss) for s in plot]
    return {"traces": rows, "runs": runs, "summary": summary, "plot": plot_rows,
            "trace_objects": traces, "checkpoints": checkpoints}


# -- output ------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, SummaryRow):
                row = row.as_dict()
            w.writerow([_fmt(row[c]) for c in columns])
    return path
