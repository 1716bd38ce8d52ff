"""Configuration parsing, experiment orchestration and the command-line front end."""

from .config import BenchGrid, ProblemSpec, RunConfig, parse_config, parse_config_text, parse_seeds
from .experiments import (SummaryRow, bench_trial, build_problem, common_checkpoints, loss_at_budget,
                          run_compare, run_optimize, run_recover_bench, write_csv)

__all__ = [
    "BenchGrid", "ProblemSpec", "RunConfig", "parse_config", "parse_config_text", "parse_seeds",
    "SummaryRow", "bench_trial", "build_problem", "common_checkpoints", "loss_at_budget",
    "run_compare", "run_optimize", "run_recover_bench", "write_csv",
]
