"""Zeroth-order stochastic cubic Newton with low-rank Hessian recovery.

Only function values of the finite-sum components are used: gradients come
from coordinate finite differences, Hessians from a few scalar curvature
probes recovered by nuclear-norm minimization, and each step minimizes a
cubic-regularized model.
"""

from .cubic import Certificate, CubicModel, CubicStep, check_optimality, solve_cubic
from .errors import CapabilityError, ConfigError, DataError, InvalidInputError, SchemaError
from .estimators import (DirectionSampler, estimate_gradient, measure_gaussian, measure_gaussian_batch,
                         measure_spherical, measure_spherical_batch, sample_sphere)
from .optimizer import (CubicNewtonConfig, RunTrace, StationarityReport, ZoSgdConfig, cubic_newton_run,
                        draw_output_index, evals_per_iteration, stationarity_report, theoretical_params,
                        zo_sgd_run)
from .problems import (CallableProblem, CsvSchema, EvalCounter, FiniteSumProblem, LinearLeastSquares,
                       LinearRegression, LogisticRegression, QuadraticProblem, iris_problem, load_csv,
                       load_iris, make_linear_nn)
from .recovery import (RecoveredHessian, RecoveryProblem, SolverConfig, estimate_hessian_batch,
                       nuclear_norm, recover)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
