"""Collocation transcription of the seasonal IR fitting problem.

Unknowns are the forcing parameters, nu, the initial state, and every node
and stage state of a 2-stage Gauss-Legendre discretisation on the weekly
grid. Each interval contributes four stage equations and two continuity
equations, so the Jacobian block with respect to the states is square and
block lower bidiagonal. Its sparse LU factorisation gives the null-space
basis ``Z = [I; -C_y^{-1} C_u]`` whose reduced coordinates are exactly the
parameters.

The solver works in scaled variables ``z = v / scale``; the objective is
divided by the data energy and state equations by the state scales.
"""

from __future__ import annotations

import copy
import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..integrate import GL2_A, GL2_B, GL2_C, IntegrationError, StepperConfig, simulate_with_stages
from ..model import FixedRates, IrParams, SeasonalForcing, TWO_PI
from ..timeseries import Cadence, IncidenceSeries
from .sqp import NlpProblem, NullSpaceBasis

OMEGA_STAR = 0.017822
NU_FLOOR = 1e-9
ALPHA_FLOOR = 1e-30
OMEGA_FLOOR = 1e-6


class SchemeId(str, enum.Enum):
    S1 = "S1"
    S2 = "S2"
    S3 = "S3"
    S4 = "S4"
    MF = "MF"


DEFAULT_LAMBDA = {SchemeId.S1: 0.0, SchemeId.S2: 0.0, SchemeId.S3: 1e4, SchemeId.S4: 10.0, SchemeId.MF: 0.0}
BOXED = (SchemeId.S2, SchemeId.S4, SchemeId.MF)


class SchemeError(ValueError):
    pass


@dataclass(frozen=True)
class SchemeSpec:
    """Fitting variant: regularisation weight, frequency box and harmonic count.

    S1 is unregularised and unboxed, S2 adds the frequency box, S3 and S4
    are their regularised counterparts and MF fits several boxed harmonics
    under ``alpha >= sum |delta_j|``.
    """

    id: SchemeId
    lam: float = 0.0
    epsilon: float = 0.0
    omega_star: tuple = (OMEGA_STAR,)
    enforce_r0_positivity: bool = False

    def __post_init__(self):
        object.__setattr__(self, "id", SchemeId(self.id))
        object.__setattr__(self, "omega_star", tuple(float(w) for w in self.omega_star))
        if self.lam < 0 or self.epsilon < 0:
            raise SchemeError("lambda and epsilon must be nonnegative")
        if self.id in (SchemeId.S1, SchemeId.S2) and self.lam != 0:
            raise SchemeError(f"{self.id.value} is unregularised (lambda must be 0)")
        if self.id in BOXED and not self.epsilon > 0:
            raise SchemeError(f"{self.id.value} needs a positive frequency box half-width")
        if not self.omega_star:
            raise SchemeError("omega_star must list at least one target frequency")
        if self.id is not SchemeId.MF and len(self.omega_star) != 1:
            raise SchemeError(f"{self.id.value} fits a single harmonic")
        if any(not w > 0 for w in self.omega_star):
            raise SchemeError("target frequencies must be positive")

    @classmethod
    def named(cls, id, omega_star=(OMEGA_STAR,), lam: Optional[float] = None, epsilon: float = 1e-2,
              positivity: bool = False) -> "SchemeSpec":
        sid = SchemeId(id)
        return cls(sid, DEFAULT_LAMBDA[sid] if lam is None else lam,
                   epsilon if sid in BOXED else 0.0, tuple(omega_star), positivity)

    @property
    def m(self) -> int:
        return len(self.omega_star)

    @property
    def boxed(self) -> bool:
        return self.id in BOXED

    @property
    def uses_slacks(self) -> bool:
        return self.id is SchemeId.MF

    def omega_bounds(self) -> list[tuple[float, float]]:
        if self.boxed:
            return [(max(w - self.epsilon, OMEGA_FLOOR), w + self.epsilon) for w in self.omega_star]
        return [(OMEGA_FLOOR, math.inf)] * self.m


@dataclass(frozen=True)
class DecisionVector:
    alpha: float
    deltas: tuple
    omegas: tuple
    nu: float
    I0: float
    R0_init: float
    nodes: np.ndarray = field(repr=False)  # (n, 2); row 0 is (I0, R0_init)
    stages: np.ndarray = field(repr=False)  # (n - 1, 2 stages, 2 states)
    slacks: tuple = ()

    def forcing(self, decimals: Optional[int] = None) -> SeasonalForcing:
        return SeasonalForcing.build(self.alpha, self.deltas, self.omegas, decimals)

    def params(self, fixed: FixedRates) -> IrParams:
        return IrParams.from_fixed(fixed, self.nu)

    def parameter_dict(self) -> dict:
        return {"alpha": self.alpha, "deltas": list(self.deltas), "omegas": list(self.omegas),
                "nu": self.nu, "I0": self.I0, "R0": self.R0_init}


class CollocationBasis(NullSpaceBasis):
    def __init__(self, lu, Cu: np.ndarray, n_p: int):
        self._lu = lu
        self.n_p = n_p
        self.Z = np.vstack([np.eye(n_p), -lu.solve(Cu)])

    def range_step(self, c):
        return np.concatenate([np.zeros(self.n_p), -self._lu.solve(np.asarray(c, dtype=float))])

    def coords(self, d):
        return np.asarray(d)[: self.n_p]

    def multipliers(self, v):
        return self._lu.solve(np.asarray(v, dtype=float)[self.n_p:], trans="T")


class CollocationProblem(NlpProblem):
    """Scaled NLP for one scheme on one training series.

    Solver coordinates for the parameter block are ``log(alpha/a_s)``, the
    relative amplitudes ``r_j = delta_j / alpha``, ``omega_j / w_s``,
    ``log(nu/n_s)``, the scaled initial state and (MF only) slacks relative
    to alpha. In these coordinates ``|delta_j| <= alpha`` is the box
    ``|r_j| <= 1`` and the near-unidentifiable direction along which alpha
    and nu grow together is a straight line. State coordinates are the
    states divided by fixed scales.
    """

    def __init__(self, scheme: SchemeSpec, data: np.ndarray, fixed: FixedRates, h: float = 1.0,
                 param_scale: Optional[dict] = None):
        data = np.asarray(data, dtype=float)
        self.scheme = scheme
        self.data = data
        self.fixed = fixed
        self.h = float(h)
        n = data.size
        self.n_nodes = n
        self.n_int = n - 1
        m = scheme.m
        self.m = m
        self.n_fit = 2 * m + 2  # alpha, deltas, omegas, nu
        self.n_p = self.n_fit + 2 + (m if scheme.uses_slacks else 0)
        self.n_y = 6 * self.n_int
        super().__init__(self.n_p + self.n_y, self.f)

        self.times = np.arange(n) * self.h
        self.weights = np.full(n, self.h)
        self.weights[[0, -1]] *= 0.5
        self.f_ref = max(0.5 * float(self.weights @ data**2), 1e-300)
        self.I_idx = np.concatenate([[self.n_fit], self.n_p + 6 * np.arange(self.n_int) + 4])

        scale_I = max(float(data.max()), 1.0)
        scale_R = scale_I * fixed.gamma / (fixed.mu + fixed.kappa)
        self.state_scale = np.array([scale_I, scale_R])
        self.row_scale = np.tile(self.state_scale, 3 * self.n_int)
        self.y_scale = np.tile(self.state_scale, 3 * self.n_int)
        self._build_sparsity()
        self._build_physical_inequalities()
        self.set_param_scale(**(param_scale or {}))

    # --- layout -------------------------------------------------------------
    def set_param_scale(self, alpha: float = 1e-4, nu: float = 1e-3):
        """Reference values for the log coordinates; derivatives do not depend on them."""
        self.alpha_scale = float(alpha)
        self.nu_scale = float(nu)
        self.omega_scale = max(self.scheme.omega_star)
        self.I0_scale = self.state_scale[0]
        self.R0_scale = self.state_scale[1]
        self._build_inequalities()

    def rescaled_for(self, dv: DecisionVector) -> "CollocationProblem":
        """Copy of the problem whose log coordinates are centred on ``dv``."""
        other = copy.copy(self)
        other.set_param_scale(alpha=max(dv.alpha, ALPHA_FLOOR), nu=max(dv.nu, NU_FLOOR))
        return other

    def pack(self, dv: DecisionVector) -> np.ndarray:
        """Physical vector of ``dv``."""
        m = self.m
        if len(dv.deltas) != m or len(dv.omegas) != m:
            raise ValueError(f"expected {m} harmonics")
        if dv.nodes.shape != (self.n_nodes, 2) or dv.stages.shape != (self.n_int, 2, 2):
            raise ValueError("collocation state dimensions do not match the grid")
        v = np.empty(self.n)
        v[0] = dv.alpha
        v[1: 1 + m] = dv.deltas
        v[1 + m: 1 + 2 * m] = dv.omegas
        v[2 * m + 1] = dv.nu
        v[2 * m + 2] = dv.I0
        v[2 * m + 3] = dv.R0_init
        if self.scheme.uses_slacks:
            slacks = dv.slacks if len(dv.slacks) == m else np.abs(dv.deltas)
            v[2 * m + 4: self.n_p] = slacks
        blocks = np.concatenate([dv.stages.reshape(self.n_int, 4), dv.nodes[1:]], axis=1)
        v[self.n_p:] = blocks.ravel()
        return v

    def unpack(self, v) -> DecisionVector:
        m = self.m
        v = np.asarray(v, dtype=float)
        blocks = v[self.n_p:].reshape(self.n_int, 6)
        nodes = np.vstack([[v[2 * m + 2], v[2 * m + 3]], blocks[:, 4:]])
        slacks = tuple(v[2 * m + 4: self.n_p]) if self.scheme.uses_slacks else ()
        return DecisionVector(float(v[0]), tuple(v[1: 1 + m]), tuple(v[1 + m: 1 + 2 * m]),
                              float(v[2 * m + 1]), float(v[2 * m + 2]), float(v[2 * m + 3]),
                              nodes, blocks[:, :4].reshape(self.n_int, 2, 2).copy(), slacks)

    def to_z(self, v) -> np.ndarray:
        """Solver coordinates of a physical vector (alpha and nu are floored first)."""
        v = np.asarray(v, dtype=float)
        m = self.m
        z = np.empty(self.n)
        alpha = max(v[0], ALPHA_FLOOR)
        z[0] = math.log(alpha / self.alpha_scale)
        z[1: 1 + m] = v[1: 1 + m] / alpha
        z[1 + m: 1 + 2 * m] = v[1 + m: 1 + 2 * m] / self.omega_scale
        z[2 * m + 1] = math.log(max(v[2 * m + 1], NU_FLOOR) / self.nu_scale)
        z[2 * m + 2] = v[2 * m + 2] / self.I0_scale
        z[2 * m + 3] = v[2 * m + 3] / self.R0_scale
        z[2 * m + 4: self.n_p] = v[2 * m + 4: self.n_p] / alpha
        z[self.n_p:] = v[self.n_p:] / self.y_scale
        return z

    def to_v(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        m = self.m
        v = np.empty(self.n)
        alpha = self.alpha_scale * math.exp(min(z[0], 700.0))
        v[0] = alpha
        v[1: 1 + m] = alpha * z[1: 1 + m]
        v[1 + m: 1 + 2 * m] = self.omega_scale * z[1 + m: 1 + 2 * m]
        v[2 * m + 1] = self.nu_scale * math.exp(min(z[2 * m + 1], 700.0))
        v[2 * m + 2] = self.I0_scale * z[2 * m + 2]
        v[2 * m + 3] = self.R0_scale * z[2 * m + 3]
        v[2 * m + 4: self.n_p] = alpha * z[2 * m + 4: self.n_p]
        v[self.n_p:] = self.y_scale * z[self.n_p:]
        return v

    def param_jacobian(self, v) -> np.ndarray:
        """d v_p / d z_p for the parameter block, evaluated at physical ``v``."""
        m = self.m
        J = np.zeros((self.n_p, self.n_p))
        alpha = v[0]
        J[0, 0] = alpha
        for j in range(m):
            J[1 + j, 0] = v[1 + j]
            J[1 + j, 1 + j] = alpha
            J[1 + m + j, 1 + m + j] = self.omega_scale
        J[2 * m + 1, 2 * m + 1] = v[2 * m + 1]
        J[2 * m + 2, 2 * m + 2] = self.I0_scale
        J[2 * m + 3, 2 * m + 3] = self.R0_scale
        for j in range(self.n_p - (2 * m + 4)):
            J[2 * m + 4 + j, 0] = v[2 * m + 4 + j]
            J[2 * m + 4 + j, 2 * m + 4 + j] = alpha
        return J

    def _chain(self, v, grad_v) -> np.ndarray:
        out = np.empty(self.n)
        out[: self.n_p] = self.param_jacobian(v).T @ grad_v[: self.n_p]
        out[self.n_p:] = grad_v[self.n_p:] * self.y_scale
        return out

    # --- objective -----------------------------------------------------------
    def physical_objective(self, v) -> float:
        I = v[self.I_idx]
        misfit = 0.5 * float(self.weights @ (I - self.data) ** 2)
        lam = self.scheme.lam
        if lam == 0:
            return misfit
        p = v[: self.n_fit]
        return misfit + 0.5 * lam * float(p @ p)

    def physical_gradient(self, v) -> np.ndarray:
        grad = np.zeros(self.n)
        grad[self.I_idx] = self.weights * (v[self.I_idx] - self.data)
        if self.scheme.lam != 0:
            grad[: self.n_fit] += self.scheme.lam * v[: self.n_fit]
        return grad

    def sse(self, v) -> float:
        return float(self.weights @ (v[self.I_idx] - self.data) ** 2)

    def f(self, z) -> float:
        return self.physical_objective(self.to_v(z)) / self.f_ref

    def grad(self, z) -> np.ndarray:
        v = self.to_v(z)
        return self._chain(v, self.physical_gradient(v)) / self.f_ref

    # --- dynamics ------------------------------------------------------------
    def _dynamics(self, v):
        m, fx = self.m, self.fixed
        alpha = v[0]
        deltas = v[1: 1 + m]
        omegas = v[1 + m: 1 + 2 * m]
        nu = v[2 * m + 1]
        blocks = v[self.n_p:].reshape(self.n_int, 6)
        X = blocks[:, :4].reshape(self.n_int, 2, 2)
        tau = self.times[:-1, None] + GL2_C[None, :] * self.h
        phase = TWO_PI * tau[..., None] * omegas
        cos, sin = np.cos(phase), np.sin(phase)
        beta = alpha + cos @ deltas
        I, R = X[..., 0], X[..., 1]
        nuN = nu * fx.N
        S = fx.N - I - R
        q = I + nuN
        force = S * I / q
        gm = fx.gamma + fx.mu
        mk = fx.mu + fx.kappa
        F = np.stack([beta * force - gm * I, fx.gamma * I - mk * R], axis=-1)
        J = np.empty(X.shape[:2] + (2, 2))
        J[..., 0, 0] = beta * (-I / q + S * nuN / q**2) - gm
        J[..., 0, 1] = -beta * I / q
        J[..., 1, 0] = fx.gamma
        J[..., 1, 1] = -mk
        P = np.empty(X.shape[:2] + (self.n_fit,))
        P[..., 0] = force
        P[..., 1: 1 + m] = cos * force[..., None]
        P[..., 1 + m: 1 + 2 * m] = -deltas * sin * TWO_PI * tau[..., None] * force[..., None]
        P[..., 2 * m + 1] = -beta * force * fx.N / q
        return X, blocks[:, 4:], F, J, P

    def defects(self, v) -> np.ndarray:
        """Physical collocation residuals, six per interval."""
        X, nxt, F, _, _ = self._dynamics(v)
        m = self.m
        prev = np.vstack([[v[2 * m + 2], v[2 * m + 3]], nxt[:-1]])
        h = self.h
        r = np.empty((self.n_int, 3, 2))
        for i in range(2):
            r[:, i] = X[:, i] - prev - h * np.einsum("j,kjs->ks", GL2_A[i], F)
        r[:, 2] = nxt - prev - h * np.einsum("j,kjs->ks", GL2_B, F)
        return r.reshape(-1)

    def c(self, z) -> np.ndarray:
        return self.defects(self.to_v(z)) / self.row_scale

    def _build_sparsity(self):
        K = self.n_int
        k = np.arange(K)[:, None, None, None, None]
        rb = np.arange(3)[None, :, None, None, None]
        cb = np.arange(2)[None, None, :, None, None]
        rc = np.arange(2)[None, None, None, :, None]
        cc = np.arange(2)[None, None, None, None, :]
        shape = (K, 3, 2, 2, 2)
        self._stage_rows = np.broadcast_to(6 * k + 2 * rb + rc, shape).ravel()
        self._stage_cols = np.broadcast_to(6 * k + 2 * cb + cc, shape).ravel()
        coef = np.vstack([GL2_A, GL2_B])  # (3 row blocks, 2 stages)
        ident = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        self._coef = coef
        self._ident = ident
        kk = np.arange(K)
        nxt_rows = np.concatenate([6 * kk + 4, 6 * kk + 5])
        nxt_cols = nxt_rows.copy()
        kp = np.arange(1, K)
        prev_rows = np.concatenate([6 * kp + j for j in range(6)])
        prev_cols = np.concatenate([6 * (kp - 1) + 4 + (j % 2) for j in range(6)])
        self._fixed_rows = np.concatenate([nxt_rows, prev_rows])
        self._fixed_cols = np.concatenate([nxt_cols, prev_cols])
        self._fixed_vals = np.concatenate([np.ones(nxt_rows.size), -np.ones(prev_rows.size)])

    def jacobians(self, v):
        """Physical (C_y sparse, C_u dense) at ``v``."""
        _, _, _, J, P = self._dynamics(v)
        h, m = self.h, self.m
        vals = (self._ident[None, :, :, None, None] * np.eye(2)[None, None, None]
                - h * self._coef[None, :, :, None, None] * J[:, None, :, :, :])
        rows = np.concatenate([self._stage_rows, self._fixed_rows])
        cols = np.concatenate([self._stage_cols, self._fixed_cols])
        data = np.concatenate([vals.ravel(), self._fixed_vals])
        Cy = sp.csc_matrix((data, (rows, cols)), shape=(self.n_y, self.n_y))
        Cu = np.zeros((self.n_y, self.n_p))
        dP = -h * np.einsum("rj,kjp->krp", self._coef, P)  # (K, 3 row blocks, n_fit)
        Cu[0::2, : self.n_fit] = dP.reshape(-1, self.n_fit)
        for r in range(3):
            Cu[2 * r, 2 * m + 2] = -1.0
            Cu[2 * r + 1, 2 * m + 3] = -1.0
        return Cy, Cu

    def _scaled_blocks(self, z):
        v = self.to_v(z)
        Cy, Cu = self.jacobians(v)
        rs = 1.0 / self.row_scale
        Cy_s = (sp.diags(rs) @ Cy @ sp.diags(self.y_scale)).tocsc()
        Cu_s = rs[:, None] * (Cu @ self.param_jacobian(v))
        return Cy_s, Cu_s

    def c_jac(self, z):
        Cy_s, Cu_s = self._scaled_blocks(z)
        return np.hstack([Cu_s, Cy_s.toarray()])

    def basis(self, z) -> CollocationBasis:
        Cy_s, Cu_s = self._scaled_blocks(z)
        return CollocationBasis(splu(Cy_s), Cu_s, self.n_p)

    def initial_reduced_hessian(self, z, basis: CollocationBasis) -> np.ndarray:
        """Gauss-Newton matrix of the objective in reduced coordinates."""
        dI = basis.Z[self.I_idx].copy()
        dI[0] *= self.I0_scale
        dI[1:] *= self.state_scale[0]
        B = dI.T @ (self.weights[:, None] * dI)
        if self.scheme.lam != 0:
            Jp = self.param_jacobian(self.to_v(z))[: self.n_fit]
            B += self.scheme.lam * (Jp.T @ Jp)
        B /= self.f_ref
        ridge = 1e-8 * max(float(np.max(np.diag(B))), 1e-300)
        return B + ridge * np.eye(B.shape[0])

    # --- inequalities -------------------------------------------------------
    def _build_inequalities(self):
        """Linear rows ``G z >= h`` in solver coordinates."""
        m, sch = self.m, self.scheme
        rows, rhs = [], []

        def row(entries, b):
            r = np.zeros(self.n_p)
            for idx, val in entries:
                r[idx] = val
            rows.append(r)
            rhs.append(b)

        if sch.uses_slacks:
            for j in range(m):
                s_idx = 2 * m + 4 + j
                row([(s_idx, 1.0), (1 + j, -1.0)], 0.0)
                row([(s_idx, 1.0), (1 + j, 1.0)], 0.0)
            row([(2 * m + 4 + j, -1.0) for j in range(m)], -1.0)
        else:
            for j in range(m):
                row([(1 + j, -1.0)], -1.0)
                row([(1 + j, 1.0)], -1.0)
        for j, (lo, hi) in enumerate(sch.omega_bounds()):
            row([(1 + m + j, 1.0)], lo / self.omega_scale)
            if math.isfinite(hi):
                row([(1 + m + j, -1.0)], -hi / self.omega_scale)
        row([(2 * m + 1, 1.0)], math.log(NU_FLOOR / self.nu_scale))
        if sch.enforce_r0_positivity:
            row([(2 * m + 3, 1.0)], 0.0)
        k = len(rows)
        Gp = sp.hstack([sp.csr_matrix(np.array(rows).reshape(k, self.n_p)), sp.csr_matrix((k, self.n_y))])
        GI = sp.csr_matrix((np.ones(self.n_nodes), (np.arange(self.n_nodes), self.I_idx)),
                           shape=(self.n_nodes, self.n))
        self._G = sp.vstack([Gp, GI]).tocsr()
        self._h = np.concatenate([rhs, np.zeros(self.n_nodes)])
        self.n_param_ineq = k

    def _build_physical_inequalities(self):
        self._omega_bounds = np.array(self.scheme.omega_bounds(), dtype=float).reshape(self.m, 2)

    def g(self, z) -> np.ndarray:
        return self._G @ z - self._h

    def g_jac(self, z):
        return self._G

    def physical_inequalities(self, v) -> np.ndarray:
        """Inequality residuals (>= 0 when satisfied) in physical units."""
        m = self.m
        v = np.asarray(v, dtype=float)
        alpha, deltas = v[0], v[1: 1 + m]
        omegas, nu = v[1 + m: 1 + 2 * m], v[2 * m + 1]
        parts = []
        if self.scheme.uses_slacks:
            parts.append([alpha - np.abs(deltas).sum()])
        else:
            parts.append(alpha - np.abs(deltas))
        lo, hi = self._omega_bounds[:, 0], self._omega_bounds[:, 1]
        parts.append(omegas - lo)
        parts.append(np.where(np.isfinite(hi), hi - omegas, np.inf))
        parts.append([nu - NU_FLOOR])
        if self.scheme.enforce_r0_positivity:
            parts.append([v[2 * m + 3]])
        parts.append(v[self.I_idx])
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    # --- counts --------------------------------------------------------------
    @property
    def n_eq(self) -> int:
        return self.n_y

    @property
    def n_ineq(self) -> int:
        return self._G.shape[0]


def transcribe(scheme: SchemeSpec, train: IncidenceSeries, fixed: FixedRates) -> CollocationProblem:
    if train.cadence is not Cadence.WEEKLY:
        raise ValueError("fitting expects a weekly series")
    if len(train) < 8:
        raise ValueError(f"training series needs at least 8 weeks, got {len(train)}")
    return CollocationProblem(scheme, train.counts, fixed)


def objective_eval(problem: CollocationProblem, dv: DecisionVector) -> float:
    return problem.physical_objective(problem.pack(dv))


def initial_guess(problem: CollocationProblem, alpha: float, deltas, omegas, nu: float, I0: float,
                  R0: float, cfg: StepperConfig = StepperConfig(h=1.0)) -> DecisionVector:
    """Decision vector whose states come from simulating the given parameters.

    When the simulation fails or leaves the physical range the states are
    built from the data instead and the solver repairs the defects.
    """
    fx = problem.fixed
    deltas = tuple(float(d) for d in deltas)
    omegas = tuple(float(w) for w in omegas)
    nodes = stages = None
    try:
        forcing = SeasonalForcing(alpha, deltas, omegas)
        params = IrParams.from_fixed(fx, nu)
        nodes, stages = simulate_with_stages(params, forcing, (I0, R0), problem.n_int, problem.h,
                                             StepperConfig(problem.h, cfg.newton_tol, cfg.newton_max_iter))
        if not (np.all(np.isfinite(nodes)) and np.all(np.abs(nodes) <= 10 * fx.N)):
            nodes = None
    except (IntegrationError, ValueError, ArithmeticError):
        nodes = None
    if nodes is None:
        nodes, stages = _states_from_data(problem, I0, R0)
    slacks = tuple(abs(d) for d in deltas) if problem.scheme.uses_slacks else ()
    return DecisionVector(float(alpha), deltas, omegas, float(nu), float(I0), float(R0),
                          nodes, stages, slacks)


def _states_from_data(problem: CollocationProblem, I0: float, R0: float):
    fx, h = problem.fixed, problem.h
    I = problem.data.copy()
    I[0] = I0
    R = np.empty_like(I)
    R[0] = R0
    mk = fx.mu + fx.kappa
    for k in range(problem.n_int):
        # trapezoid step of the linear recovered equation
        R[k + 1] = (R[k] * (1 - 0.5 * h * mk) + 0.5 * h * fx.gamma * (I[k] + I[k + 1])) / (1 + 0.5 * h * mk)
    nodes = np.column_stack([I, R])
    stages = nodes[:-1, None, :] + GL2_C[None, :, None] * (nodes[1:] - nodes[:-1])[:, None, :]
    return nodes, stages
