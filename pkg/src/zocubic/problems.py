"""Finite-sum objectives ``F(x) = (1/N) sum_xi f(x; xi)`` and dataset ingestion.

Every problem exposes a zeroth-order evaluation oracle that is metered by an
:class:`EvalCounter`.  The built-in problems additionally provide analytic
gradients and Hessians so that estimators can be checked against ground truth;
those oracles never touch a counter.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from .errors import CapabilityError, DataError, InvalidInputError, SchemaError

__all__ = [
    "EvalCounter",
    "DatasetRecord",
    "CsvSchema",
    "FiniteSumProblem",
    "CallableProblem",
    "QuadraticProblem",
    "LinearLeastSquares",
    "LinearRegression",
    "LogisticRegression",
    "make_linear_nn",
    "load_csv",
    "load_iris",
    "iris_problem",
    "IRIS_CLASSES",
    "LOGISTIC_THIRD_DERIVATIVE_BOUND",
]

# sup_t |d^3/dt^3 log(1 + e^{-t})| = max_p p(1-p)|1-2p| = sqrt(3)/18
LOGISTIC_THIRD_DERIVATIVE_BOUND = math.sqrt(3.0) / 18.0

# Versicolor and virginica are merged into a single negative class.
IRIS_CLASSES = {"Iris-setosa": 1.0, "Iris-versicolor": -1.0, "Iris-virginica": -1.0}


class EvalCounter:
    """Thread-safe tally of scalar component evaluations.

    Counters only grow.  Two counters combine by addition, so per-task
    counters can be merged in any order.
    """

    def __init__(self, count: int = 0):
        if count < 0:
            raise InvalidInputError("count must be nonnegative")
        self._count = int(count)
        self._lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    def increment(self, k: int = 1) -> None:
        if k < 0:
            raise InvalidInputError("counter increments must be nonnegative")
        with self._lock:
            self._count += int(k)

    def merge(self, other: "EvalCounter") -> None:
        self.increment(other.count)

    def __add__(self, other: "EvalCounter") -> "EvalCounter":
        return EvalCounter(self.count + other.count)

    def __eq__(self, other):
        if isinstance(other, EvalCounter):
            return self.count == other.count
        return NotImplemented

    def __repr__(self):
        return f"EvalCounter({self._count})"


@dataclass(frozen=True)
class DatasetRecord:
    """One training sample: feature vector and label (class +-1 or real target)."""

    features: np.ndarray
    label: float

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=float))


class FiniteSumProblem:
    """Base class for ``F(x) = (1/N) sum f(x; xi)``.

    Subclasses implement :meth:`_values` (batched evaluation of one component)
    and, when available, :meth:`_gradient` / :meth:`_hessian`.

    Parameters
    ----------
    n : int
        Dimension of the decision variable.
    N : int
        Number of components.
    rank_bound : int, optional
        Upper bound on the rank of every component Hessian.
    lipschitz_hessian : float, optional
        Lipschitz constant ``L2`` of the component Hessians (spectral norm).
    sigma1, sigma2, tau2 : float, optional
        Bounds on the gradient variance and the second/fourth central moments
        of the component Hessians.
    """

    has_derivatives = False

    def __init__(self, n: int, N: int, *, rank_bound=None, lipschitz_hessian=None,
                 sigma1=None, sigma2=None, tau2=None):
        if n < 1 or N < 1:
            raise InvalidInputError(f"need n >= 1 and N >= 1, got n={n}, N={N}")
        self.n = int(n)
        self.N = int(N)
        self.rank_bound = rank_bound
        self.lipschitz_hessian = lipschitz_hessian
        self.sigma1 = sigma1
        self.sigma2 = sigma2
        self.tau2 = tau2

    # -- hooks ---------------------------------------------------------------
    def _values(self, points: np.ndarray, xi: int) -> np.ndarray:
        raise NotImplementedError

    def _all_values(self, x: np.ndarray) -> np.ndarray:
        return np.array([self._values(x[None, :], xi)[0] for xi in range(self.N)])

    def _gradient(self, x, xi):
        raise CapabilityError(f"{type(self).__name__} has no analytic gradient")

    def _hessian(self, x, xi):
        raise CapabilityError(f"{type(self).__name__} has no analytic Hessian")

    # -- validation ----------------------------------------------------------
    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise InvalidInputError(f"expected a vector of length {self.n}, got shape {x.shape}")
        return x

    def _check_xi(self, xi) -> int:
        xi = int(xi)
        if not 0 <= xi < self.N:
            raise InvalidInputError(f"component index {xi} outside [0, {self.N})")
        return xi

    # -- zeroth-order oracle ------------------------------------------------
    def eval_component(self, x, xi: int, counter: EvalCounter | None = None) -> float:
        """Return ``f(x; xi)``, charging one evaluation to `counter`."""
        x = self._check_x(x)
        xi = self._check_xi(xi)
        value = float(self._values(x[None, :], xi)[0])
        if counter is not None:
            counter.increment(1)
        return value

    def eval_points(self, points, xi: int, counter: EvalCounter | None = None) -> np.ndarray:
        """Evaluate component `xi` at each row of `points`; charges one per row."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.n:
            raise InvalidInputError(f"points must have {self.n} columns, got {points.shape[1]}")
        xi = self._check_xi(xi)
        values = np.asarray(self._values(points, xi), dtype=float)
        if counter is not None:
            counter.increment(points.shape[0])
        return values

    def full_objective(self, x, counter: EvalCounter | None = None) -> float:
        """Mean of all components at `x`; charges ``N`` evaluations."""
        x = self._check_x(x)
        value = float(np.mean(self._all_values(x)))
        if counter is not None:
            counter.increment(self.N)
        return value

    def loss(self, x) -> float:
        """Unmetered ``F(x)``, used for progress reporting."""
        return float(np.mean(self._all_values(self._check_x(x))))

    # -- analytic oracles ----------------------------------------------------
    def analytic_gradient(self, x, xi: int) -> np.ndarray:
        return np.asarray(self._gradient(self._check_x(x), self._check_xi(xi)), dtype=float)

    def analytic_hessian(self, x, xi: int) -> np.ndarray:
        return np.asarray(self._hessian(self._check_x(x), self._check_xi(xi)), dtype=float)

    def full_gradient(self, x) -> np.ndarray:
        x = self._check_x(x)
        return np.mean([self._gradient(x, xi) for xi in range(self.N)], axis=0)

    def full_hessian(self, x) -> np.ndarray:
        x = self._check_x(x)
        return np.mean([self._hessian(x, xi) for xi in range(self.N)], axis=0)


class CallableProblem(FiniteSumProblem):
    """Black-box problem wrapping ``f(x, xi) -> float``.

    Optional `gradient` / `hessian` callables with the same signature turn on
    the analytic oracles.
    """

    def __init__(self, f: Callable[[np.ndarray, int], float], n: int, N: int = 1, *,
                 gradient=None, hessian=None, **metadata):
        super().__init__(n, N, **metadata)
        self._f = f
        self._grad_fn = gradient
        self._hess_fn = hessian
        self.has_derivatives = gradient is not None and hessian is not None

    def _values(self, points, xi):
        return np.array([self._f(p, xi) for p in points], dtype=float)

    def _gradient(self, x, xi):
        if self._grad_fn is None:
            return super()._gradient(x, xi)
        return self._grad_fn(x, xi)

    def _hessian(self, x, xi):
        if self._hess_fn is None:
            return super()._hessian(x, xi)
        return self._hess_fn(x, xi)


class QuadraticProblem(FiniteSumProblem):
    """Components ``f(x; xi) = 0.5 x'A_xi x + b_xi'x + c_xi`` with symmetric ``A_xi``."""

    has_derivatives = True

    def __init__(self, A, b=None, c=None):
        A = np.asarray(A, dtype=float)
        if A.ndim == 2:
            A = A[None]
        N, n, m = A.shape
        if n != m:
            raise InvalidInputError("component matrices must be square")
        A = 0.5 * (A + np.transpose(A, (0, 2, 1)))
        b = np.zeros((N, n)) if b is None else np.asarray(b, dtype=float).reshape(N, n)
        c = np.zeros(N) if c is None else np.asarray(c, dtype=float).reshape(N)
        ranks = [np.linalg.matrix_rank(a) for a in A]
        super().__init__(n, N, rank_bound=int(max(ranks)), lipschitz_hessian=0.0)
        self.A, self.b, self.c = A, b, c

    def _values(self, points, xi):
        A = self.A[xi]
        return 0.5 * np.einsum("ki,ij,kj->k", points, A, points) + points @ self.b[xi] + self.c[xi]

    def _all_values(self, x):
        return 0.5 * np.einsum("i,kij,j->k", x, self.A, x) + self.b @ x + self.c

    def _gradient(self, x, xi):
        return self.A[xi] @ x + self.b[xi]

    def _hessian(self, x, xi):
        return self.A[xi].copy()


class LinearLeastSquares(FiniteSumProblem):
    """Components ``f(x; xi) = ||B_xi x - t_xi||^2`` with ``B_xi`` of shape ``(m, n)``."""

    has_derivatives = True

    def __init__(self, B, targets, *, rank_bound=None):
        B = np.asarray(B, dtype=float)
        if B.ndim != 3:
            raise InvalidInputError("B must have shape (N, m, n)")
        N, m, n = B.shape
        t = np.asarray(targets, dtype=float).reshape(N, m)
        if rank_bound is None:
            rank_bound = min(m, n)
        hessians = 2.0 * np.einsum("kmi,kmj->kij", B, B)
        mean_h = hessians.mean(axis=0)
        dev = np.array([np.linalg.norm(h - mean_h, 2) for h in hessians])
        super().__init__(n, N, rank_bound=rank_bound, lipschitz_hessian=0.0,
                         sigma2=float(np.sqrt(np.mean(dev**2))),
                         tau2=float(np.mean(dev**4) ** 0.25))
        self.B, self.targets = B, t
        self._hessians = hessians

    def _values(self, points, xi):
        res = points @ self.B[xi].T - self.targets[xi]
        return np.sum(res**2, axis=1)

    def _all_values(self, x):
        res = self.B @ x - self.targets
        return np.sum(res**2, axis=1)

    def _gradient(self, x, xi):
        return 2.0 * self.B[xi].T @ (self.B[xi] @ x - self.targets[xi])

    def _hessian(self, x, xi):
        return self._hessians[xi].copy()


class LinearRegression(LinearLeastSquares):
    """Squared loss ``f(x; xi) = (b_xi - z_xi'x)^2``; Hessian ``2 z z'`` has rank 1."""

    def __init__(self, Z, b):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        super().__init__(Z[:, None, :], np.asarray(b, dtype=float).reshape(-1, 1), rank_bound=1)
        self.Z = Z
        self.b_targets = np.asarray(b, dtype=float).reshape(-1)

    @classmethod
    def from_records(cls, records: Sequence[DatasetRecord]) -> "LinearRegression":
        Z, labels = _stack(records)
        return cls(Z, labels)


class LogisticRegression(FiniteSumProblem):
    """Logistic loss ``f(x; xi) = log(1 + exp(-y_xi z_xi'x))`` with ``y_xi`` in {-1, +1}.

    The Hessian ``sig(t)(1 - sig(t)) z z'`` is rank one.  ``L2`` is the exact
    bound ``max_xi ||z_xi||^3 * sqrt(3)/18``.  The moment metadata are upper
    bounds derived from ``|sig| <= 1`` and ``sig(1 - sig) <= 1/4``.
    """

    has_derivatives = True

    def __init__(self, Z, y):
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        y = np.asarray(y, dtype=float).reshape(-1)
        if Z.shape[0] != y.shape[0]:
            raise InvalidInputError("features and labels disagree in length")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise InvalidInputError("logistic labels must be exactly -1 or +1")
        sq = np.sum(Z**2, axis=1)
        mean_sq = float(sq.mean())
        spread = np.maximum(sq, mean_sq) / 4.0
        super().__init__(
            Z.shape[1], Z.shape[0], rank_bound=1,
            lipschitz_hessian=float(np.max(sq) ** 1.5 * LOGISTIC_THIRD_DERIVATIVE_BOUND),
            sigma1=math.sqrt(mean_sq),
            sigma2=float(np.sqrt(np.mean(spread**2))),
            tau2=float(np.mean(spread**4) ** 0.25),
        )
        self.Z, self.y = Z, y

    @classmethod
    def from_records(cls, records: Sequence[DatasetRecord], standardize: bool = False):
        Z, labels = _stack(records)
        if standardize:
            Z = _standardize(Z)
        return cls(Z, labels)

    def _values(self, points, xi):
        return np.logaddexp(0.0, -self.y[xi] * (points @ self.Z[xi]))

    def _all_values(self, x):
        return np.logaddexp(0.0, -self.y * (self.Z @ x))

    def _gradient(self, x, xi):
        z, y = self.Z[xi], self.y[xi]
        return -y * expit(-y * (z @ x)) * z

    def _hessian(self, x, xi):
        z = self.Z[xi]
        s = expit(self.y[xi] * (z @ x))
        return s * (1.0 - s) * np.outer(z, z)

    def full_gradient(self, x):
        x = self._check_x(x)
        w = -self.y * expit(-self.y * (self.Z @ x))
        return self.Z.T @ w / self.N

    def full_hessian(self, x):
        x = self._check_x(x)
        s = expit(self.y * (self.Z @ x))
        return (self.Z.T * (s * (1 - s))) @ self.Z / self.N


def make_linear_nn(dims: Sequence[int], weights: Sequence[np.ndarray], layer: int,
                   records) -> LinearLeastSquares:
    """Least-squares loss of a linear network as a function of one weight matrix.

    The network is ``W_L ... W_1 z`` with identity activations.  The decision
    variable is the row-stacked ``vec(W_layer)`` (layer is 1-based), so the
    component loss is ``||A W c - y||^2 = ||(A kron c') vec(W) - y||^2`` with
    ``A = W_L ... W_{layer+1}`` and ``c = W_{layer-1} ... W_1 z``, giving the
    Hessian block ``2 A'A kron c c'``.

    Parameters
    ----------
    dims : sequence of int
        Layer widths ``d_0, ..., d_L``.
    weights : sequence of ndarray
        ``W_1, ..., W_L`` with ``W_i`` of shape ``(d_i, d_{i-1})``.  The entry
        for `layer` is ignored (it is the variable).
    layer : int
        Index ``i`` in ``1..L`` of the layer being optimized.
    records : DatasetRecord, (z, y) pair, or a sequence of either
        Inputs ``z`` of length ``d_0`` and outputs ``y`` of length ``d_L``.
    """
    dims = [int(d) for d in dims]
    L = len(dims) - 1
    if L < 1:
        raise InvalidInputError("need at least one layer")
    if not 1 <= layer <= L:
        raise InvalidInputError(f"layer must lie in 1..{L}, got {layer}")
    if len(weights) != L:
        raise InvalidInputError(f"expected {L} weight matrices, got {len(weights)}")
    mats = []
    for i, W in enumerate(weights, start=1):
        if i == layer and W is None:
            mats.append(None)
            continue
        W = np.asarray(W, dtype=float)
        if W.shape != (dims[i], dims[i - 1]):
            raise InvalidInputError(f"W_{i} has shape {W.shape}, expected {(dims[i], dims[i - 1])}")
        mats.append(W)

    A = np.eye(dims[layer])
    for W in mats[layer:]:
        A = W @ A
    if isinstance(records, (DatasetRecord, tuple)):
        records = [records]
    B, T = [], []
    for rec in records:
        z, y = (rec.features, rec.label) if isinstance(rec, DatasetRecord) else rec
        z = np.asarray(z, dtype=float).reshape(-1)
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if z.shape[0] != dims[0] or y.shape[0] != dims[-1]:
            raise InvalidInputError("record dimensions do not match the input/output widths")
        c = z
        for W in mats[: layer - 1]:
            c = W @ c
        B.append(np.kron(A, c[None, :]))
        T.append(y)
    rank = min(dims[layer:])
    return LinearLeastSquares(np.array(B), np.array(T), rank_bound=rank)


# -- data ingestion ------------------------------------------------------------

@dataclass
class CsvSchema:
    """Column layout of a CSV dataset.

    `label` and `features` accept column names (header required) or 0-based
    indices.  With ``features=None`` every non-label column is used.  With a
    `classes` table, label strings are mapped through it; otherwise labels are
    parsed as reals.  ``header=None`` detects a header row automatically.
    """

    label: str | int
    features: Sequence[str | int] | None = None
    classes: Mapping[str, float] | None = None
    header: bool | None = None


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _resolve(col, header, ncols, what):
    if isinstance(col, str) and not col.lstrip("-").isdigit():
        if header is None:
            raise SchemaError(f"{what} column {col!r} given by name but the file has no header")
        if col not in header:
            raise SchemaError(f"{what} column {col!r} not found in header {header}")
        return header.index(col)
    idx = int(col)
    if not -ncols <= idx < ncols:
        raise SchemaError(f"{what} column index {idx} out of range for {ncols} columns")
    return idx % ncols


def load_csv(path, schema: CsvSchema) -> list[DatasetRecord]:
    """Parse a comma-separated dataset into records.

    Raises
    ------
    InvalidInputError
        If the file holds no data rows.
    SchemaError
        If a named column is missing.
    DataError
        On a malformed row; the message carries the 1-based line number.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if any(c.strip() for c in r)]
    if not rows:
        raise InvalidInputError(f"{path}: empty file")
    first = [c.strip() for c in rows[0][1]]
    ncols = len(first)

    header = schema.header
    if header is None:
        by_name = isinstance(schema.label, str) and not schema.label.lstrip("-").isdigit()
        if by_name:
            header = True
        else:
            label_idx = int(schema.label) % ncols
            header = not all(_is_float(c) for j, c in enumerate(first) if j != label_idx)
    names = first if header else None
    data = rows[1:] if header else rows
    if not data:
        raise InvalidInputError(f"{path}: no data rows")

    label_idx = _resolve(schema.label, names, ncols, "label")
    if schema.features is None:
        feat_idx = [j for j in range(ncols) if j != label_idx]
    else:
        feat_idx = [_resolve(c, names, ncols, "feature") for c in schema.features]
    if not feat_idx:
        raise SchemaError("no feature columns selected")

    records = []
    for lineno, row in data:
        row = [c.strip() for c in row]
        if len(row) != ncols:
            raise DataError(f"{path}:{lineno}: expected {ncols} fields, got {len(row)}")
        try:
            feats = np.array([float(row[j]) for j in feat_idx])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: non-numeric feature ({exc})") from None
        raw = row[label_idx]
        if schema.classes is not None:
            if raw not in schema.classes:
                raise DataError(f"{path}:{lineno}: label {raw!r} not in class table")
            label = float(schema.classes[raw])
        else:
            try:
                label = float(raw)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric label {raw!r}") from None
        records.append(DatasetRecord(feats, label))
    return records


def iris_path() -> Path:
    return Path(str(resources.files("zocubic") / "data" / "iris.csv"))


def load_iris(path=None, features=None, classes=None) -> list[DatasetRecord]:
    """Load the iris data (bundled copy by default) as a two-class dataset."""
    schema = CsvSchema(label="species", features=features, classes=classes or IRIS_CLASSES)
    return load_csv(path or iris_path(), schema)


def iris_problem(path=None, features=None, classes=None, standardize: bool = True) -> LogisticRegression:
    """Two-class logistic regression on iris with standardized features."""
    return LogisticRegression.from_records(load_iris(path, features, classes), standardize=standardize)


def _stack(records):
    if len(records) == 0:
        raise InvalidInputError("no records")
    Z = np.array([r.features for r in records], dtype=float)
    if Z.ndim != 2:
        raise InvalidInputError("records have inconsistent feature lengths")
    return Z, np.array([r.label for r in records], dtype=float)


def _standardize(Z):
    std = Z.std(axis=0)
    std[std == 0] = 1.0
    return (Z - Z.mean(axis=0)) / std
