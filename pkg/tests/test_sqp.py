import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from seasonir.assimilate.sqp import NlpProblem, SqpOptions, SqpStatus, sqp_solve


def bound_quadratic():
    return NlpProblem(1, lambda x: (x[0] - 2.0) ** 2, lambda x: np.array([2 * (x[0] - 2.0)]),
                      ineq=lambda x: np.array([x[0] - 3.0]), ineq_jac=lambda x: np.array([[1.0]]))


def rosenbrock():
    f = lambda x: 100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2
    g = lambda x: np.array([-400 * x[0] * (x[1] - x[0] ** 2) - 2 * (1 - x[0]), 200 * (x[1] - x[0] ** 2)])
    return NlpProblem(2, f, g)


def equality_quadratic():
    return NlpProblem(2, lambda x: 0.5 * x @ x, lambda x: x.copy(),
                      eq=lambda x: np.array([x[0] + x[1] - 2.0]), eq_jac=lambda x: np.array([[1.0, 1.0]]))


def test_active_bound():
    res = sqp_solve(bound_quadratic(), [0.0])
    assert res.status is SqpStatus.CONVERGED
    assert res.x[0] == pytest.approx(3.0, abs=1e-6)
    assert res.ineq_multipliers[0] == pytest.approx(2.0, abs=1e-5)


def test_rosenbrock():
    res = sqp_solve(rosenbrock(), [-1.2, 1.0], SqpOptions(tol=1e-10))
    assert res.status is SqpStatus.CONVERGED
    assert np.abs(res.x - 1.0).max() <= 1e-6


def test_equality_quadratic_against_kkt_solve():
    res = sqp_solve(equality_quadratic(), [5.0, -3.0])
    K = np.array([[1.0, 0.0, -1.0], [0.0, 1.0, -1.0], [1.0, 1.0, 0.0]])
    x1, x2, y = np.linalg.solve(K, [0.0, 0.0, 2.0])
    assert res.status is SqpStatus.CONVERGED
    assert res.x == pytest.approx([x1, x2], abs=1e-6)
    assert res.eq_multipliers == pytest.approx([y], abs=1e-6)


def test_nonlinear_equality_circle():
    prob = NlpProblem(2, lambda x: x[0] + x[1], lambda x: np.ones(2),
                      eq=lambda x: np.array([x @ x - 2.0]), eq_jac=lambda x: 2 * x.reshape(1, 2))
    res = sqp_solve(prob, [1.0, -0.5])
    assert res.converged
    assert res.x == pytest.approx([-1.0, -1.0], abs=1e-6)


def test_finite_difference_fallback():
    prob = NlpProblem(2, lambda x: (x[0] - 1) ** 2 + 3 * (x[1] + 2) ** 2,
                      ineq=lambda x: np.array([x[0] + x[1] + 0.5]))
    res = sqp_solve(prob, [0.0, 0.0], SqpOptions(tol=1e-6))
    assert res.converged
    # Lagrange conditions 2(x0-1) = 6(x1+2) = lam on x0 + x1 = -0.5 give lam = 3/4
    assert res.x == pytest.approx([1.375, -1.875], abs=1e-5)


def test_budget_exhaustion_reports_max_iter():
    res = sqp_solve(rosenbrock(), [-1.2, 1.0], SqpOptions(max_iter=3))
    assert res.status is SqpStatus.MAX_ITER and res.iterations == 3


def test_infeasible_linearisation_is_reported():
    prob = NlpProblem(1, lambda x: x[0] ** 2, lambda x: 2 * x,
                      ineq=lambda x: np.array([x[0] - 1.0, -x[0]]), ineq_jac=lambda x: np.array([[1.0], [-1.0]]))
    assert sqp_solve(prob, [0.5]).status is SqpStatus.QP_INFEASIBLE


def test_bound_at_tiny_offset_is_respected():
    # a bound 5e-11 above the unconstrained minimiser must still be honoured exactly
    w = np.array([1.0, 1.0, 1.0, 2.0])
    target, lower = np.array([0.0, 0.0, 0.0, 1.0]), np.array([1.0, 1.0, 4.8993731571586054e-11, -1.0])
    prob = NlpProblem(4, lambda x: 0.5 * np.sum(w * (x - target) ** 2), lambda x: w * (x - target),
                      ineq=lambda x: x - lower, ineq_jac=lambda x: np.eye(4))
    res = sqp_solve(prob, lower + 1.0)
    assert res.converged
    assert res.x == pytest.approx(np.maximum(target, lower), abs=1e-9)
    assert res.x[2] >= lower[2] - 1e-20


@given(st.lists(st.floats(0.1, 10), min_size=2, max_size=5), st.data())
def test_separable_bounded_quadratics(weights, data):
    n = len(weights)
    w = np.array(weights)
    target = np.array(data.draw(st.lists(st.floats(-5, 5), min_size=n, max_size=n)))
    lower = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=n, max_size=n)))
    prob = NlpProblem(n, lambda x: 0.5 * np.sum(w * (x - target) ** 2), lambda x: w * (x - target),
                      ineq=lambda x: x - lower, ineq_jac=lambda x: np.eye(n))
    res = sqp_solve(prob, lower + 1.0)
    assert res.converged
    assert res.x == pytest.approx(np.maximum(target, lower), abs=1e-6)
