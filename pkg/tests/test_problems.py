import math
import threading

import numpy as np
import pytest
from scipy.optimize import approx_fprime

from zocubic.errors import CapabilityError, DataError, InvalidInputError, SchemaError
from zocubic.problems import (IRIS_CLASSES, LOGISTIC_THIRD_DERIVATIVE_BOUND, CallableProblem, CsvSchema,
                              EvalCounter, LinearRegression, LogisticRegression,
                              QuadraticProblem, iris_problem, load_csv, load_iris, make_linear_nn)


def test_counter_is_thread_safe():
    c = EvalCounter()

    def work():
        for _ in range(2000):
            c.increment()

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert c.count == 16000
    assert (c + EvalCounter(5)).count == 16005


def test_metered_and_unmetered_evaluations():
    p = LogisticRegression(np.eye(3), [1, -1, 1])
    c = EvalCounter()
    x = np.ones(3)
    p.eval_component(x, 0, c)
    assert c.count == 1
    p.eval_points(np.zeros((7, 3)), 2, c)
    assert c.count == 8
    F = p.full_objective(x, c)
    assert c.count == 11
    assert p.loss(x) == pytest.approx(F)
    assert c.count == 11


def test_bad_inputs_rejected():
    p = QuadraticProblem(np.eye(2))
    with pytest.raises(InvalidInputError):
        p.eval_component(np.ones(3), 0)
    with pytest.raises(InvalidInputError):
        p.eval_component(np.ones(2), 1)
    with pytest.raises(InvalidInputError):
        LogisticRegression(np.eye(2), [1, 0])


def test_callable_problem_without_oracles():
    p = CallableProblem(lambda x, xi: float(x @ x) + xi, n=2, N=3)
    assert p.eval_component(np.ones(2), 2) == 4.0
    with pytest.raises(CapabilityError):
        p.full_gradient(np.ones(2))


def test_logistic_third_derivative_constant():
    # sup |d/dt sig(t)(1 - sig(t))| on a fine grid
    t = np.linspace(-10, 10, 2_000_001)
    s = 1 / (1 + np.exp(-t))
    assert np.max(np.abs(s * (1 - s) * (1 - 2 * s))) == pytest.approx(LOGISTIC_THIRD_DERIVATIVE_BOUND, rel=1e-9)
    assert LOGISTIC_THIRD_DERIVATIVE_BOUND == pytest.approx(math.sqrt(3) / 18)


def test_logistic_derivatives_match_finite_differences():
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((20, 4))
    y = rng.choice([-1.0, 1.0], 20)
    p = LogisticRegression(Z, y)
    x = rng.standard_normal(4)
    g = approx_fprime(x, p.loss, 1e-7)
    assert np.allclose(p.full_gradient(x), g, atol=1e-6)
    H = np.array([approx_fprime(x, lambda w: p.full_gradient(w)[j], 1e-7) for j in range(4)])
    assert np.allclose(p.full_hessian(x), H, atol=1e-6)
    per = np.mean([p.analytic_hessian(x, i) for i in range(20)], axis=0)
    assert np.allclose(per, p.full_hessian(x))
    assert p.lipschitz_hessian == pytest.approx(np.max(np.linalg.norm(Z, axis=1)) ** 3 * math.sqrt(3) / 18)


def test_linear_regression_hessian_is_rank_one():
    rng = np.random.default_rng(1)
    Z, b = rng.standard_normal((5, 3)), rng.standard_normal(5)
    p = LinearRegression(Z, b)
    for i in range(5):
        assert np.allclose(p.analytic_hessian(rng.standard_normal(3), i), 2 * np.outer(Z[i], Z[i]))
    x = rng.standard_normal(3)
    assert p.eval_component(x, 2) == pytest.approx((b[2] - Z[2] @ x) ** 2)


def test_linear_network_matches_forward_pass():
    rng = np.random.default_rng(2)
    dims = [3, 4, 2, 2]
    Ws = [rng.standard_normal((dims[i + 1], dims[i])) for i in range(3)]
    data = [(rng.standard_normal(3), rng.standard_normal(2)) for _ in range(6)]
    layer = 2
    p = make_linear_nn(dims, [Ws[0], None, Ws[2]], layer, data)
    assert p.n == dims[layer] * dims[layer - 1]
    assert p.rank_bound == 2
    W = rng.standard_normal((dims[layer], dims[layer - 1]))

    def forward_loss(Wmid, z, t):
        return float(np.sum((Ws[2] @ Wmid @ Ws[0] @ z - t) ** 2))

    x = W.reshape(-1)  # row-stacked
    for i, (z, t) in enumerate(data):
        assert p.eval_component(x, i) == pytest.approx(forward_loss(W, z, t))
        A, c = Ws[2], Ws[0] @ z
        assert np.allclose(p.analytic_hessian(x, i), 2 * np.kron(A.T @ A, np.outer(c, c)))


def test_linear_network_validation():
    with pytest.raises(InvalidInputError):
        make_linear_nn([2, 2], [None], 2, [(np.ones(2), np.ones(2))])
    with pytest.raises(InvalidInputError):
        make_linear_nn([2, 3], [np.ones((2, 2))], 1, [(np.ones(2), np.ones(3))])


def test_iris_dataset():
    recs = load_iris()
    assert len(recs) == 150
    labels = np.array([r.label for r in recs])
    assert (labels == 1).sum() == 50 and (labels == -1).sum() == 100
    p = iris_problem()
    assert (p.n, p.N) == (4, 150)
    assert np.allclose(p.Z.mean(axis=0), 0, atol=1e-12)
    assert p.loss(np.zeros(4)) == pytest.approx(math.log(2))
    assert set(IRIS_CLASSES) == {"Iris-setosa", "Iris-versicolor", "Iris-virginica"}


def test_csv_errors_carry_context(tmp_path):
    good = tmp_path / "d.csv"
    good.write_text("a,b,label\n1,2,x\n3,4,y\n")
    recs = load_csv(good, CsvSchema(label="label", classes={"x": 1, "y": -1}))
    assert np.array_equal(recs[1].features, [3.0, 4.0]) and recs[1].label == -1.0

    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,label\n1,2,x\n3,oops,y\n")
    with pytest.raises(DataError, match=r"bad\.csv:3"):
        load_csv(bad, CsvSchema(label="label", classes={"x": 1, "y": -1}))
    with pytest.raises(DataError, match=r":2"):
        load_csv(good, CsvSchema(label="label", classes={"y": -1}))
    with pytest.raises(SchemaError):
        load_csv(good, CsvSchema(label="missing"))

    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(InvalidInputError):
        load_csv(empty, CsvSchema(label=0))

    noheader = tmp_path / "n.csv"
    noheader.write_text("1,2,1\n3,4,-1\n")
    recs = load_csv(noheader, CsvSchema(label=2))
    assert [r.label for r in recs] == [1.0, -1.0]
