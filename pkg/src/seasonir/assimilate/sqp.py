"""Reduced-space SQP with damped BFGS and an l1 merit line search.

Problems are ``min f(x)`` subject to ``c(x) = 0`` and ``g(x) >= 0``. Each
iteration splits the step into a range-space part that restores the
linearised equalities and a null-space part ``Z w`` found from a small
inequality-constrained QP in the reduced coordinates ``w``. Only the
reduced Hessian ``Z^T W Z`` is approximated, so the cost per iteration is
dominated by the null-space basis, which a problem may supply itself
(the collocation transcription builds it from a sparse LU factorisation).
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_triangular

from .qp import QpInfeasible, QpMaxIter, qp_subproblem_solve

log = logging.getLogger(__name__)


class SqpStatus(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"
    LINE_SEARCH_FAIL = "LineSearchFail"
    QP_INFEASIBLE = "QpInfeasible"


class NullSpaceBasis:
    """Interface for a basis of the null space of the equality Jacobian."""

    Z: np.ndarray

    def range_step(self, c: np.ndarray) -> np.ndarray:
        """A step p with ``A p = -c``."""
        raise NotImplementedError

    def coords(self, d: np.ndarray) -> np.ndarray:
        """Reduced coordinates of a displacement ``d``."""
        raise NotImplementedError

    def multipliers(self, v: np.ndarray) -> np.ndarray:
        """Least-squares-style lambda with ``A^T lambda`` matching ``v`` on the range space."""
        raise NotImplementedError


class OrthonormalBasis(NullSpaceBasis):
    """Null space from a complete QR factorisation of ``A^T``."""

    def __init__(self, A: np.ndarray, n: int):
        A = np.asarray(A, dtype=float).reshape(-1, n)
        self.m = A.shape[0]
        if self.m == 0:
            self.Z = np.eye(n)
            self._Y = np.zeros((n, 0))
            self._R = np.zeros((0, 0))
            return
        Q, R = np.linalg.qr(A.T, mode="complete")
        self._Y = Q[:, : self.m]
        self._R = R[: self.m]
        self.Z = Q[:, self.m:]
        if np.min(np.abs(np.diag(self._R))) <= 1e-12 * max(1.0, np.max(np.abs(self._R))):
            raise np.linalg.LinAlgError("equality Jacobian is rank deficient")

    def range_step(self, c):
        if self.m == 0:
            return np.zeros(self.Z.shape[0])
        w = solve_triangular(self._R, -np.asarray(c, dtype=float), trans="T")
        return self._Y @ w

    def coords(self, d):
        return self.Z.T @ d

    def multipliers(self, v):
        if self.m == 0:
            return np.zeros(0)
        return solve_triangular(self._R, self._Y.T @ v)


class NlpProblem:
    """Callback bundle describing a smooth NLP.

    Missing derivatives fall back to central differences. ``basis`` may be
    overridden to supply a structured null-space basis.
    """

    def __init__(self, n: int, objective: Callable, gradient: Optional[Callable] = None,
                 eq: Optional[Callable] = None, eq_jac: Optional[Callable] = None,
                 ineq: Optional[Callable] = None, ineq_jac: Optional[Callable] = None):
        self.n = n
        self._f, self._grad = objective, gradient
        self._c, self._c_jac = eq, eq_jac
        self._g, self._g_jac = ineq, ineq_jac

    def f(self, x) -> float:
        return float(self._f(x))

    def grad(self, x) -> np.ndarray:
        if self._grad is not None:
            return np.asarray(self._grad(x), dtype=float)
        return _fd_jac(lambda y: np.atleast_1d(self._f(y)), x)[0]

    def c(self, x) -> np.ndarray:
        return np.zeros(0) if self._c is None else np.atleast_1d(np.asarray(self._c(x), dtype=float))

    def g(self, x) -> np.ndarray:
        return np.zeros(0) if self._g is None else np.atleast_1d(np.asarray(self._g(x), dtype=float))

    def g_jac(self, x) -> np.ndarray:
        if self._g is None:
            return np.zeros((0, self.n))
        if self._g_jac is not None:
            return np.asarray(self._g_jac(x), dtype=float).reshape(-1, self.n)
        return _fd_jac(self.g, x)

    def c_jac(self, x) -> np.ndarray:
        if self._c is None:
            return np.zeros((0, self.n))
        if self._c_jac is not None:
            return np.asarray(self._c_jac(x), dtype=float).reshape(-1, self.n)
        return _fd_jac(self.c, x)

    def basis(self, x) -> NullSpaceBasis:
        return OrthonormalBasis(self.c_jac(x), self.n)

    def initial_reduced_hessian(self, x, basis: NullSpaceBasis) -> Optional[np.ndarray]:
        """Optional starting matrix for the quasi-Newton update (None means identity)."""
        return None


def _fd_jac(fun, x, rel: float = 1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        step = rel * (1.0 + abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += step
        xm[j] -= step
        cols.append((np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2 * step))
    return np.column_stack(cols)


@dataclass
class SqpOptions:
    tol: float = 1e-8
    feas_tol: float = 1e-10
    max_iter: int = 200
    armijo: float = 1e-4
    min_step: float = 1e-10
    range_shrink_tries: int = 5
    second_order_correction: bool = True


@dataclass
class SqpResult:
    x: np.ndarray
    f: float
    status: SqpStatus
    iterations: int
    kkt_residual: float
    eq_multipliers: np.ndarray = field(repr=False)
    ineq_multipliers: np.ndarray = field(repr=False)

    @property
    def converged(self) -> bool:
        return self.status is SqpStatus.CONVERGED


class _Point:
    """Cached evaluations at one iterate."""

    def __init__(self, problem: NlpProblem, x):
        self.x = x
        self.f = problem.f(x)
        self.c = problem.c(x)
        self.g = problem.g(x)

    def complete(self, problem: NlpProblem) -> bool:
        """Evaluate derivatives; False if any of them is not finite."""
        try:
            self.grad = problem.grad(self.x)
            self.G = problem.g_jac(self.x)
            self.basis = problem.basis(self.x)
        except (ArithmeticError, RuntimeError, np.linalg.LinAlgError):
            return False
        return bool(np.all(np.isfinite(self.grad)) and np.all(np.isfinite(self.basis.Z)))

    def merit(self, pen: float) -> float:
        return self.f + pen * _infeas1(self.c, self.g)


def _infeas1(c, g) -> float:
    return float(np.abs(c).sum() + np.maximum(0.0, -g).sum())


def _finite(pt: _Point) -> bool:
    return np.isfinite(pt.f) and np.all(np.isfinite(pt.c)) and np.all(np.isfinite(pt.g))


def sqp_solve(problem: NlpProblem, x0, options: SqpOptions = SqpOptions(), B0=None) -> SqpResult:
    """Local minimiser of ``problem`` from ``x0``.

    Converged means the reduced KKT residual (stationarity, primal
    feasibility and complementarity, max norm) is at most ``options.tol``
    and the equality residual is at most ``options.feas_tol``.
    """
    opt = options
    pt = _Point(problem, np.array(x0, dtype=float))
    if not _finite(pt):
        raise ValueError("objective or constraints are not finite at the starting point")
    if not pt.complete(problem):
        raise ValueError("derivatives are not finite at the starting point")
    nz = pt.basis.Z.shape[1]
    if B0 is None:
        B0 = problem.initial_reduced_hessian(pt.x, pt.basis)
    scale_first = B0 is None
    B = np.eye(nz) if B0 is None else _make_pd(np.array(B0, dtype=float))
    pen = 1.0
    lam = np.zeros(pt.c.size)
    mu = np.zeros(pt.g.size)
    kkt = np.inf

    for it in range(opt.max_iter + 1):
        Z = pt.basis.Z
        p_range = pt.basis.range_step(pt.c)
        GZ = pt.G @ Z
        Zg = Z.T @ pt.grad
        sol = theta = None
        for k in range(opt.range_shrink_tries + 1):
            theta = 0.5**k
            p = theta * p_range
            # curvature cross term is dropped: the range step is lower order near a solution
            try:
                sol = qp_subproblem_solve(B, Zg, ineq=(GZ, -(pt.g + pt.G @ p)))
                break
            except QpInfeasible:
                continue
            except QpMaxIter:
                break
        if sol is None:
            kkt = _kkt(pt, mu, GZ, Zg)
            return SqpResult(pt.x, pt.f, SqpStatus.QP_INFEASIBLE, it, kkt, lam, mu)
        w = sol.x
        mu = sol.ineq_multipliers
        lam = pt.basis.multipliers(pt.grad - pt.G.T @ mu)
        kkt = _kkt(pt, mu, GZ, Zg)
        feas = float(np.max(np.abs(pt.c), initial=0.0))
        if kkt <= opt.tol and feas <= opt.feas_tol:
            return SqpResult(pt.x, pt.f, SqpStatus.CONVERGED, it, kkt, lam, mu)
        if it == opt.max_iter:
            break

        d = theta * p_range + Z @ w
        mult_norm = max(np.max(np.abs(lam), initial=0.0), np.max(np.abs(mu), initial=0.0))
        pen = max(1.5 * mult_norm, 0.5 * (pen + 1.5 * mult_norm), 1e-8)
        infeas = theta * np.abs(pt.c).sum() + np.maximum(0.0, -pt.g).sum()
        gd = float(pt.grad @ d)
        if infeas > 0 and gd - pen * infeas > -0.1 * pen * infeas:
            pen = max(pen, 2.0 * gd / infeas)
        D = gd - pen * infeas
        phi0 = pt.merit(pen)

        new = _line_search(problem, pt, d, D, phi0, pen, opt)
        if new is None:
            return SqpResult(pt.x, pt.f, SqpStatus.LINE_SEARCH_FAIL, it, kkt, lam, mu)

        s = pt.basis.coords(new.x - pt.x)
        y = new.basis.Z.T @ (new.grad - new.G.T @ mu) - Z.T @ (pt.grad - pt.G.T @ mu)
        if it == 0 and scale_first:
            B = _initial_scaling(s, y, nz)
        B = _damped_bfgs(B, s, y)
        log.debug("it=%d f=%.6e kkt=%.3e |c|=%.3e pen=%.3e", it, pt.f, kkt, feas, pen)
        pt = new

    return SqpResult(pt.x, pt.f, SqpStatus.MAX_ITER, opt.max_iter, kkt, lam, mu)


def _kkt(pt: _Point, mu, GZ, Zg) -> float:
    stat = np.max(np.abs(Zg - GZ.T @ mu), initial=0.0) if mu.size else np.max(np.abs(Zg), initial=0.0)
    feas = max(np.max(np.abs(pt.c), initial=0.0), np.max(np.maximum(0.0, -pt.g), initial=0.0))
    comp = np.max(np.abs(mu * pt.g), initial=0.0) if mu.size else 0.0
    return float(max(stat, feas, comp))


def _line_search(problem, pt: _Point, d, D, phi0, pen, opt: SqpOptions) -> Optional[_Point]:
    # summed residuals carry rounding error of order eps per term
    noise = 10.0 * np.finfo(float).eps * (abs(pt.f) + pen * (pt.c.size + pt.g.size))
    t = 1.0
    first = True
    while t >= opt.min_step:
        trial = _Point(problem, pt.x + t * d)
        ok = _finite(trial)
        if ok and trial.merit(pen) <= phi0 + opt.armijo * t * D + noise:
            if trial.complete(problem):
                return trial
            ok = False
        if first and ok and opt.second_order_correction and trial.c.size:
            # Maratos guard: a second range step absorbs the curvature of c
            x_soc = pt.x + d + pt.basis.range_step(trial.c)
            soc = _Point(problem, x_soc)
            if _finite(soc) and soc.merit(pen) <= phi0 + opt.armijo * D + noise and soc.complete(problem):
                return soc
        if ok:
            excess = trial.merit(pen) - phi0 - t * D
            t_new = -D * t * t / (2.0 * excess) if excess > 0 else 0.5 * t
            t = min(max(t_new, 0.1 * t), 0.5 * t)
        else:
            t *= 0.1
        first = False
    return None


def _initial_scaling(s, y, nz):
    sy, yy = float(s @ y), float(y @ y)
    if sy > 0 and yy > 0 and np.isfinite(yy):
        return (yy / sy) * np.eye(nz)
    return np.eye(nz)


def _damped_bfgs(B, s, y, damping: float = 0.2):
    """Powell-damped BFGS update keeping B positive definite.

    Falls back to a scaled identity if rounding destroys definiteness.
    """
    Bs = B @ s
    sBs = float(s @ Bs)
    if not np.isfinite(sBs) or sBs <= 1e-300:
        return B
    sy = float(s @ y)
    if sy < damping * sBs:
        theta = (1.0 - damping) * sBs / (sBs - sy)
        y = theta * y + (1.0 - theta) * Bs
        sy = float(s @ y)
    if sy <= 1e-300 or not np.all(np.isfinite(y)):
        return B
    B_new = B - np.outer(Bs, Bs) / sBs + np.outer(y, y) / sy
    return _make_pd(0.5 * (B_new + B_new.T))


def _make_pd(B, floor: float = 1e-12):
    """Symmetric B with eigenvalues clipped to ``floor`` times the largest."""
    if not np.all(np.isfinite(B)):
        return np.eye(B.shape[0])
    w, V = np.linalg.eigh(0.5 * (B + B.T))
    top = float(np.max(np.abs(w)))
    if top <= 0 or not np.isfinite(top):
        return np.eye(B.shape[0])
    if w.min() >= floor * top:
        return B
    w = np.maximum(w, floor * top)
    return (V * w) @ V.T
