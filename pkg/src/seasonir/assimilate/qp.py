"""Dense convex QP by the Goldfarb-Idnani dual active-set method.

Solves ``min 1/2 p^T H p + g^T p`` subject to ``A_eq p = b_eq`` and
``G p >= h`` for positive-definite ``H``. The dual method starts from the
unconstrained minimiser and adds violated constraints one at a time, so it
needs no feasible starting point and reports infeasibility directly.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve


class QpInfeasible(RuntimeError):
    pass


class QpMaxIter(RuntimeError):
    pass


class QpSolution(NamedTuple):
    x: np.ndarray
    eq_multipliers: np.ndarray
    ineq_multipliers: np.ndarray
    iterations: int


def qp_subproblem_solve(H, g, eq: Optional[tuple] = None, ineq: Optional[tuple] = None,
                        max_iter: Optional[int] = None, feas_tol: float = 1e-10) -> QpSolution:
    """Primal-dual solution of the QP.

    ``eq`` is ``(A_eq, b_eq)`` and ``ineq`` is ``(G, h)``; either may be None.
    Returned multipliers satisfy ``H x + g = A_eq^T y + G^T z`` with ``z >= 0``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    g = np.asarray(g, dtype=float).ravel()
    n = g.size
    A_eq, b_eq = _pair(eq, n)
    G, h = _pair(ineq, n)
    m_eq, m_in = len(b_eq), len(h)
    normals = np.vstack([A_eq, G])
    rhs = np.concatenate([b_eq, h])
    row_norm = np.maximum(np.linalg.norm(normals, axis=1), 1e-300)
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(g)) and np.all(np.isfinite(normals))
            and np.all(np.isfinite(rhs))):
        raise ValueError("QP data must be finite")
    if max_iter is None:
        max_iter = 10 * (n + m_eq + m_in) + 50

    try:
        chol = cho_factor(H)
    except np.linalg.LinAlgError:
        raise ValueError("H must be positive definite") from None
    Hinv = cho_solve(chol, np.eye(n))
    x = -Hinv @ g

    active: list[int] = []
    sign: dict[int, float] = {}  # equality rows are entered with the sign that makes them violated
    u = np.zeros(0)
    iterations = 0
    pending_eq = list(range(m_eq))

    while True:
        if pending_eq:
            p = pending_eq.pop(0)
            s = normals[p] @ x - rhs[p]
            sign[p] = -1.0 if s > 0 else 1.0
        else:
            if m_in == 0:
                break
            slack = (G @ x - h) / row_norm[m_eq:]
            # roundoff in G x - h scales with the magnitudes summed, not with an absolute floor
            allowance = feas_tol * (np.abs(h) + np.abs(G) @ np.abs(x)) / row_norm[m_eq:]
            slack[[a - m_eq for a in active if a >= m_eq]] = np.inf
            j = int(np.argmin(slack + allowance))
            if slack[j] >= -allowance[j]:
                break
            p = m_eq + j
            sign[p] = 1.0
        n_p = sign[p] * normals[p]
        b_p = sign[p] * rhs[p]
        u_plus = 0.0
        while True:
            iterations += 1
            if iterations > max_iter:
                raise QpMaxIter(f"no convergence in {max_iter} active-set iterations")
            z, r = _directions(Hinv, normals, sign, active, n_p)
            s_p = n_p @ x - b_p
            # partial (dual) step length: first active inequality whose multiplier hits zero
            t1, k_drop = np.inf, -1
            for idx, a in enumerate(active):
                if a >= m_eq and r[idx] > 0:
                    ratio = u[idx] / r[idx]
                    if ratio < t1:
                        t1, k_drop = ratio, idx
            zn = z @ n_p
            degenerate = zn <= 1e-14 * (1.0 + n_p @ Hinv @ n_p)
            t2 = np.inf if degenerate else -s_p / zn
            if p < m_eq and degenerate:
                if abs(s_p) <= feas_tol * (1.0 + abs(b_p)) * row_norm[p]:
                    break  # redundant equality
                raise QpInfeasible("equality constraints are inconsistent")
            if np.isinf(t1) and np.isinf(t2):
                raise QpInfeasible("constraint set is infeasible")
            if np.isinf(t2):
                u = u - t1 * r
                u_plus += t1
                active.pop(k_drop)
                u = np.delete(u, k_drop)
                continue
            t = min(t1, t2)
            x = x + t * z
            u = u - t * r
            u_plus += t
            if t2 <= t1:
                active.append(p)
                u = np.append(u, u_plus)
                break
            active.pop(k_drop)
            u = np.delete(u, k_drop)

    y = np.zeros(m_eq)
    zmul = np.zeros(m_in)
    for idx, a in enumerate(active):
        if a < m_eq:
            y[a] = sign[a] * u[idx]
        else:
            zmul[a - m_eq] = u[idx]
    return QpSolution(x, y, zmul, iterations)


def _pair(block, n):
    if block is None:
        return np.zeros((0, n)), np.zeros(0)
    M, b = block
    M = np.asarray(M, dtype=float).reshape(-1, n)
    b = np.asarray(b, dtype=float).ravel()
    if M.shape[0] != b.size:
        raise ValueError("constraint matrix and right-hand side disagree in length")
    return M, b


def _directions(Hinv, normals, sign, active, n_p):
    """Primal step direction z and dual direction r for adding normal ``n_p``."""
    Hn = Hinv @ n_p
    if not active:
        return Hn, np.zeros(0)
    Na = np.column_stack([sign[a] * normals[a] for a in active])
    HNa = Hinv @ Na
    W = Na.T @ HNa
    r = np.linalg.solve(W, Na.T @ Hn)
    z = Hn - HNa @ r
    return z, r
