"""Fixed-step two-stage Gauss-Legendre integration.

The generic stepper works for any vector field. ``integrate_ir`` runs the
same scheme through a compiled kernel specialised to the IR model, which
is what makes multi-period orbit tracing affordable. ``monodromy``
propagates the fundamental matrix of a periodic linear system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numba
import numpy as np

from .model import IrParams, SeasonalForcing

_S3 = math.sqrt(3.0)
GL2_A = np.array([[0.25, 0.25 - _S3 / 6.0], [0.25 + _S3 / 6.0, 0.25]])
GL2_B = np.array([0.5, 0.5])
GL2_C = np.array([0.5 - _S3 / 6.0, 0.5 + _S3 / 6.0])


class IntegrationError(RuntimeError):
    """Newton iteration for the stage equations did not converge."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g})")
        self.time = time


@dataclass(frozen=True)
class StepperConfig:
    h: float = 0.25
    newton_tol: float = 1e-12
    newton_max_iter: int = 30

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("step size h must be positive")
        if not 0 < self.newton_tol <= 1e-2:
            raise ValueError("newton_tol must lie in (0, 1e-2]")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be positive")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class FundamentalSolution:
    monodromy: np.ndarray
    sigma: float

    @property
    def multipliers(self) -> np.ndarray:
        return np.linalg.eigvals(self.monodromy)

    @property
    def exponents(self) -> np.ndarray:
        return np.log(self.multipliers.astype(complex)) / self.sigma


def fd_jacobian(rhs, t, x, f0=None):
    """Central-difference Jacobian with perturbation 1e-6 * (1 + |x_j|)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        step = 1e-6 * (1.0 + abs(x[j]))
        e = np.zeros_like(x)
        e[j] = step
        cols.append((np.asarray(rhs(t, x + e)) - np.asarray(rhs(t, x - e))) / (2 * step))
    return np.column_stack(cols)


def gl2_step(rhs: Callable, t: float, x, cfg: StepperConfig, jac: Optional[Callable] = None,
             h: Optional[float] = None) -> np.ndarray:
    """One Gauss-Legendre step; stage derivatives are found by Newton iteration."""
    h = cfg.h if h is None else h
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.size
    k0 = np.asarray(rhs(t, x), dtype=float).reshape(d)
    K = np.vstack([k0, k0])
    eye = np.eye(2 * d)
    for _ in range(cfg.newton_max_iter):
        X = x + h * (GL2_A @ K)
        F = np.empty((2, d))
        M = eye.copy()
        for i in range(2):
            ti = t + GL2_C[i] * h
            fi = np.asarray(rhs(ti, X[i]), dtype=float).reshape(d)
            F[i] = K[i] - fi
            Ji = jac(ti, X[i]) if jac is not None else fd_jacobian(rhs, ti, X[i])
            for j in range(2):
                M[i * d:(i + 1) * d, j * d:(j + 1) * d] -= h * GL2_A[i, j] * Ji
        if not np.all(np.isfinite(F)):
            raise IntegrationError("non-finite stage residual", t)
        try:
            dK = np.linalg.solve(M, F.ravel()).reshape(2, d)
        except np.linalg.LinAlgError:
            raise IntegrationError("singular stage matrix", t) from None
        K -= dK
        if abs(h) * np.max(np.abs(dK)) <= cfg.newton_tol * (abs(h) * (1.0 + np.max(np.abs(K))) + np.max(np.abs(x))):
            break
    else:
        raise IntegrationError(f"Newton did not converge in {cfg.newton_max_iter} iterations", t)
    return x + h * (GL2_B @ K)


def _step_grid(t0: float, tf: float, h: float) -> np.ndarray:
    span = tf - t0
    if span == 0:
        return np.array([t0])
    n_full = int(math.floor(abs(span) / h * (1 + 1e-12)))
    direction = math.copysign(1.0, span)
    times = t0 + direction * h * np.arange(n_full + 1)
    if abs(tf - times[-1]) > 1e-12 * max(1.0, abs(tf)):
        times = np.append(times, tf)
    else:
        times[-1] = tf
    return times


def integrate(rhs: Callable, t0: float, tf: float, x0, cfg: StepperConfig,
              jac: Optional[Callable] = None) -> Trajectory:
    """Repeated :func:`gl2_step` from ``t0`` to ``tf``; the last step is shortened to land on ``tf``.

    ``tf < t0`` integrates backward in time.
    """
    times = _step_grid(float(t0), float(tf), cfg.h)
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    states = np.empty((len(times), x.size))
    states[0] = x
    for n in range(len(times) - 1):
        x = gl2_step(rhs, times[n], x, cfg, jac, h=times[n + 1] - times[n])
        states[n + 1] = x
    return Trajectory(times, states)


# --- IR kernel ---------------------------------------------------------------

_A11, _A12, _A21, _A22 = GL2_A.ravel()
_C1, _C2 = GL2_C


@numba.njit(cache=True)
def _beta(t, alpha, deltas, omegas):
    b = alpha
    for j in range(deltas.shape[0]):
        b += deltas[j] * math.cos(2.0 * math.pi * omegas[j] * t)
    return b


@numba.njit(cache=True)
def _solve4(M, F):
    # Gaussian elimination with partial pivoting; M and F are overwritten.
    for c in range(4):
        p = c
        big = abs(M[c, c])
        for r in range(c + 1, 4):
            if abs(M[r, c]) > big:
                big = abs(M[r, c])
                p = r
        if big == 0.0:
            return False
        if p != c:
            for k in range(4):
                tmp = M[c, k]
                M[c, k] = M[p, k]
                M[p, k] = tmp
            tmp = F[c]
            F[c] = F[p]
            F[p] = tmp
        for r in range(c + 1, 4):
            fac = M[r, c] / M[c, c]
            for k in range(c, 4):
                M[r, k] -= fac * M[c, k]
            F[r] -= fac * F[c]
    for c in range(3, -1, -1):
        acc = F[c]
        for k in range(c + 1, 4):
            acc -= M[c, k] * F[k]
        F[c] = acc / M[c, c]
    return True


@numba.njit(cache=True)
def _ir_kernel(I, R, t0, h, nsteps, N, mu, gamma, kappa, nu, alpha, deltas, omegas,
               tol, maxit, record_every, out, stages):
    """Advance (I, R) by ``nsteps`` GL2 steps of size ``h``.

    Every ``record_every``-th state is written to ``out`` as (t, I, R).
    When ``stages`` has rows, row n receives the stage states (I1, R1, I2, R2)
    of step n.
    Returns (I, R, steps_done); steps_done < nsteps flags a Newton failure.
    """
    nuN = nu * N
    gm = gamma + mu
    mk = mu + kappa
    M = np.empty((4, 4))
    F = np.empty(4)
    row = 0
    for n in range(nsteps):
        t = t0 + n * h
        b0 = _beta(t, alpha, deltas, omegas)
        k1i = b0 * (N - I - R) * I / (I + nuN) - gm * I
        k1r = gamma * I - mk * R
        k2i = k1i
        k2r = k1r
        t1 = t + _C1 * h
        t2 = t + _C2 * h
        b1 = _beta(t1, alpha, deltas, omegas)
        b2 = _beta(t2, alpha, deltas, omegas)
        ok = False
        for _ in range(maxit):
            x1i = I + h * (_A11 * k1i + _A12 * k2i)
            x1r = R + h * (_A11 * k1r + _A12 * k2r)
            x2i = I + h * (_A21 * k1i + _A22 * k2i)
            x2r = R + h * (_A21 * k1r + _A22 * k2r)
            q1 = x1i + nuN
            q2 = x2i + nuN
            F[0] = k1i - (b1 * (N - x1i - x1r) * x1i / q1 - gm * x1i)
            F[1] = k1r - (gamma * x1i - mk * x1r)
            F[2] = k2i - (b2 * (N - x2i - x2r) * x2i / q2 - gm * x2i)
            F[3] = k2r - (gamma * x2i - mk * x2r)
            j11a = b1 * (-x1i / q1 + (N - x1i - x1r) * nuN / (q1 * q1)) - gm
            j12a = -b1 * x1i / q1
            j11b = b2 * (-x2i / q2 + (N - x2i - x2r) * nuN / (q2 * q2)) - gm
            j12b = -b2 * x2i / q2
            M[0, 0] = 1.0 - h * _A11 * j11a
            M[0, 1] = -h * _A11 * j12a
            M[0, 2] = -h * _A12 * j11a
            M[0, 3] = -h * _A12 * j12a
            M[1, 0] = -h * _A11 * gamma
            M[1, 1] = 1.0 + h * _A11 * mk
            M[1, 2] = -h * _A12 * gamma
            M[1, 3] = h * _A12 * mk
            M[2, 0] = -h * _A21 * j11b
            M[2, 1] = -h * _A21 * j12b
            M[2, 2] = 1.0 - h * _A22 * j11b
            M[2, 3] = -h * _A22 * j12b
            M[3, 0] = -h * _A21 * gamma
            M[3, 1] = h * _A21 * mk
            M[3, 2] = -h * _A22 * gamma
            M[3, 3] = 1.0 + h * _A22 * mk
            if not _solve4(M, F):
                break
            k1i -= F[0]
            k1r -= F[1]
            k2i -= F[2]
            k2r -= F[3]
            dmax = max(max(abs(F[0]), abs(F[1])), max(abs(F[2]), abs(F[3])))
            kmax = max(max(abs(k1i), abs(k1r)), max(abs(k2i), abs(k2r)))
            if not math.isfinite(dmax):
                break
            # stage error judged by its effect on the step, relative to the state
            if abs(h) * dmax <= tol * (abs(h) * (1.0 + kmax) + max(abs(I), abs(R))):
                ok = True
                break
        if not ok:
            return I, R, n
        if stages.shape[0] > 0:
            stages[n, 0] = I + h * (_A11 * k1i + _A12 * k2i)
            stages[n, 1] = R + h * (_A11 * k1r + _A12 * k2r)
            stages[n, 2] = I + h * (_A21 * k1i + _A22 * k2i)
            stages[n, 3] = R + h * (_A21 * k1r + _A22 * k2r)
        I = I + 0.5 * h * (k1i + k2i)
        R = R + 0.5 * h * (k1r + k2r)
        if record_every > 0 and (n + 1) % record_every == 0:
            out[row, 0] = t0 + (n + 1) * h
            out[row, 1] = I
            out[row, 2] = R
            row += 1
    return I, R, nsteps


_NO_STAGES = np.empty((0, 4))


def _kernel_args(params: IrParams, forcing: SeasonalForcing):
    return (params.N, params.mu, params.gamma, params.kappa, params.nu, forcing.alpha,
            np.ascontiguousarray(forcing.delta_values, dtype=float),
            np.ascontiguousarray(forcing.omega_values, dtype=float))


def advance_ir(params: IrParams, forcing: SeasonalForcing, t0: float, x0, nsteps: int, h: float,
               cfg: StepperConfig = StepperConfig()) -> np.ndarray:
    """Final state after ``nsteps`` steps of size ``h`` (nothing recorded)."""
    dummy = np.empty((0, 3))
    I, R, done = _ir_kernel(float(x0[0]), float(x0[1]), float(t0), float(h), int(nsteps),
                            *_kernel_args(params, forcing), cfg.newton_tol, cfg.newton_max_iter,
                            0, dummy, _NO_STAGES)
    if done < nsteps:
        raise IntegrationError("Newton did not converge", t0 + done * h)
    return np.array([I, R])


def integrate_ir(params: IrParams, forcing: SeasonalForcing, t0: float, tf: float, x0,
                 cfg: StepperConfig = StepperConfig(), record_every: int = 1) -> Trajectory:
    """IR trajectory from the compiled stepper; same scheme as :func:`integrate`.

    Only every ``record_every``-th node is stored (the start and end always are).
    """
    if tf < t0:
        raise ValueError("integrate_ir integrates forward only")
    x0 = np.asarray(x0, dtype=float)
    span = tf - t0
    if span == 0:
        return Trajectory(np.array([t0]), x0.reshape(1, 2).copy())
    n_full = int(math.floor(span / cfg.h * (1 + 1e-12)))
    remainder = span - n_full * cfg.h
    if remainder <= 1e-12 * max(1.0, abs(tf)):
        remainder = 0.0
        h = span / n_full
    else:
        h = cfg.h
    args = _kernel_args(params, forcing)
    n_rec = n_full // record_every if record_every > 0 else 0
    out = np.empty((n_rec, 3))
    I, R, done = _ir_kernel(float(x0[0]), float(x0[1]), float(t0), h, n_full, *args,
                            cfg.newton_tol, cfg.newton_max_iter, record_every, out, _NO_STAGES)
    if done < n_full:
        raise IntegrationError("Newton did not converge", t0 + done * h)
    rows = [np.array([[t0, x0[0], x0[1]]]), out]
    if remainder > 0:
        last = np.empty((1, 3))
        I, R, done = _ir_kernel(I, R, t0 + n_full * h, remainder, 1, *args,
                                cfg.newton_tol, cfg.newton_max_iter, 1, last, _NO_STAGES)
        if done < 1:
            raise IntegrationError("Newton did not converge", t0 + n_full * h)
        last[0, 0] = tf
        rows.append(last)
    elif n_rec == 0 or out[-1, 0] != t0 + n_full * h:
        rows.append(np.array([[tf, I, R]]))
    table = np.vstack(rows)
    table[-1, 0] = tf
    return Trajectory(table[:, 0], table[:, 1:])


def simulate_with_stages(params: IrParams, forcing: SeasonalForcing, x0, nsteps: int, h: float,
                         cfg: StepperConfig = StepperConfig()):
    """Nodes (nsteps+1, 2) and stage states (nsteps, 2, 2) on the grid t_k = k h."""
    out = np.empty((nsteps, 3))
    stages = np.empty((nsteps, 4))
    I, R, done = _ir_kernel(float(x0[0]), float(x0[1]), 0.0, float(h), int(nsteps),
                            *_kernel_args(params, forcing), cfg.newton_tol, cfg.newton_max_iter,
                            1, out, stages)
    if done < nsteps:
        raise IntegrationError("Newton did not converge", done * h)
    nodes = np.vstack([np.asarray(x0, dtype=float).reshape(1, 2), out[:, 1:]])
    return nodes, stages.reshape(nsteps, 2, 2)


# --- periodic linear systems -------------------------------------------------

def _stage_times(t: np.ndarray, h: float) -> np.ndarray:
    return t[:, None] + GL2_C[None, :] * h


def _eval_A(A: Callable, times: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        return np.asarray(A(times), dtype=float)
    flat = [np.asarray(A(float(s)), dtype=float) for s in times.ravel()]
    return np.array(flat).reshape(times.shape + flat[0].shape)


def _ordered_product(P: np.ndarray) -> np.ndarray:
    # P[k] is the k-th step matrix; returns P[n-1] @ ... @ P[0]
    while len(P) > 1:
        if len(P) % 2:
            P = np.concatenate([P, np.eye(P.shape[1])[None]])
        P = P[1::2] @ P[0::2]
    return P[0]


def monodromy(A: Callable, sigma: float, cfg: StepperConfig = StepperConfig(),
              vectorized: bool = False, chunk: int = 65536) -> FundamentalSolution:
    """Fundamental matrix ``Z(sigma)`` of ``Z' = A(t) Z``, ``Z(0) = I``.

    The stage equations are linear, so each GL2 step is applied as its exact
    step matrix ``I + h (b^T (x) I) (I - h A~)^{-1} [A(t1); A(t2)]``; this is
    what Newton reaches after one iteration. ``vectorized`` means ``A``
    accepts an array of times and returns an array of matrices.
    """
    sigma = float(sigma)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    n = max(1, math.ceil(sigma / cfg.h - 1e-9))
    h = sigma / n
    d = np.asarray(A(np.zeros(1)) if vectorized else A(0.0)).shape[-1]
    Z = np.eye(d)
    for start in range(0, n, chunk):
        t = h * np.arange(start, min(n, start + chunk))
        As = _eval_A(A, _stage_times(t, h), vectorized)  # (k, 2, d, d)
        k = len(t)
        M = np.tile(np.eye(2 * d), (k, 1, 1))
        for i in range(2):
            for j in range(2):
                M[:, i * d:(i + 1) * d, j * d:(j + 1) * d] -= h * GL2_A[i, j] * As[:, i]
        rhs = np.concatenate([As[:, 0], As[:, 1]], axis=1)  # (k, 2d, d)
        try:
            K = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            raise IntegrationError("singular stage matrix in monodromy", float(t[0])) from None
        P = np.eye(d)[None] + h * (GL2_B[0] * K[:, :d] + GL2_B[1] * K[:, d:])
        Z = _ordered_product(P) @ Z
    return FundamentalSolution(Z, sigma)
