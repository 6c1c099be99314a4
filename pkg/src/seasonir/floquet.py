"""Periodic-solution existence and stability for the seasonal IR model.

The trivial solution (I, R) = (0, 0) has closed-form Floquet multipliers
because its variational matrix is lower triangular and the forcing
averages to alpha over a period. The nontrivial orbit is not explicit; it
is traced by forward integration past a transient, after which the
sufficient condition R_max = R0 * max Phi(t) < 1 is evaluated on it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .integrate import StepperConfig, advance_ir, integrate_ir, monodromy
from .model import IrParams, SeasonalForcing, equilibria, forcing_eval, r0_of


class Classification(str, enum.Enum):
    DIES_OUT = "DiesOut"
    STABLE_ENDEMIC_CYCLE = "StableEndemicCycle"
    INCONCLUSIVE = "Inconclusive"


class NoConvergenceToOrbit(RuntimeError):
    def __init__(self, residual: float, transient: float):
        super().__init__(f"trajectory did not close after a {transient:.6g}-week transient "
                         f"(closure residual {residual:.3e})")
        self.residual = residual
        self.transient = transient


class MultiplierMismatch(RuntimeError):
    """Closed-form and numerically integrated trivial multipliers disagree."""


@dataclass(frozen=True)
class PeriodicOrbit:
    sigma: float
    samples: np.ndarray  # rows (t, I, R), t measured from the start of the period
    closure_residual: float
    transient: float

    @property
    def h(self) -> float:
        return float(self.samples[1, 0] - self.samples[0, 0])

    @property
    def start(self) -> np.ndarray:
        return self.samples[0, 1:]


@dataclass(frozen=True)
class StabilityReport:
    r0: float
    r_max: Optional[float]
    trivial_multipliers: tuple
    classification: Classification
    orbit: Optional[PeriodicOrbit] = None

    def to_dict(self) -> dict:
        return {
            "r0": self.r0,
            "r_max": self.r_max,
            "trivial_multipliers": [float(m) for m in self.trivial_multipliers],
            "classification": self.classification.value,
            "closure_residual": None if self.orbit is None else self.orbit.closure_residual,
            "sigma": None if self.orbit is None else self.orbit.sigma,
            "phi_sampling_step": None if self.orbit is None else self.orbit.h,
            "transient": None if self.orbit is None else self.orbit.transient,
        }


def existence_check(jacobian, sigma: float, tol: float = 1e-9) -> bool:
    """True when no eigenvalue of ``jacobian`` sits on the lattice (2 pi / sigma) i Z."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    spacing = 2.0 * math.pi / float(sigma)
    for lam in np.linalg.eigvals(np.asarray(jacobian, dtype=float)):
        scale = tol * max(1.0, abs(lam))
        off_lattice_imag = abs(lam.imag - spacing * round(lam.imag / spacing))
        if abs(lam.real) <= scale and off_lattice_imag <= scale:
            return False
    return True


def trivial_multipliers_closed(params: IrParams, forcing: SeasonalForcing) -> tuple[float, float]:
    sigma = float(forcing.sigma)
    return (math.exp(sigma * (forcing.alpha / params.nu - params.gamma - params.mu)),
            math.exp(-sigma * (params.mu + params.kappa)))


def trivial_variational_matrix(params: IrParams, forcing: SeasonalForcing):
    """Vectorised A(t) of the linearisation at (0, 0)."""
    def A(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (2, 2))
        out[..., 0, 0] = forcing_eval(forcing, t) / params.nu - params.gamma - params.mu
        out[..., 1, 0] = params.gamma
        out[..., 1, 1] = -params.mu - params.kappa
        return out
    return A


def trivial_multipliers_numeric(params: IrParams, forcing: SeasonalForcing,
                                cfg: StepperConfig = StepperConfig()) -> tuple[float, float]:
    fund = monodromy(trivial_variational_matrix(params, forcing), float(forcing.sigma), cfg,
                     vectorized=True)
    # Z(sigma) is lower triangular, so its diagonal holds the multipliers
    return float(fund.monodromy[0, 0]), float(fund.monodromy[1, 1])


def trivial_stability(params: IrParams, forcing: SeasonalForcing, cfg: Optional[StepperConfig] = None,
                      verify: bool = True, rtol: float = 1e-6):
    """Classification and multipliers of the disease-free periodic solution.

    DiesOut iff R0 < 1; otherwise the trivial solution says nothing about the
    endemic regime and the result is Inconclusive. With ``verify`` the
    closed forms are checked against an integrated monodromy matrix.
    """
    closed = trivial_multipliers_closed(params, forcing)
    if verify:
        cfg = cfg or StepperConfig()
        # large exponents amplify the O(h^4) error, so halve the step before giving up
        for halvings in range(4):
            step = StepperConfig(cfg.h / 2 ** halvings, cfg.newton_tol, cfg.newton_max_iter)
            numeric = trivial_multipliers_numeric(params, forcing, step)
            if np.allclose(numeric, closed, rtol=rtol, atol=1e-300):
                break
        else:
            raise MultiplierMismatch(f"closed form {closed} vs numeric {numeric}")
    r0 = r0_of(params, forcing)
    cls = Classification.DIES_OUT if r0 < 1.0 else Classification.INCONCLUSIVE
    return cls, closed


def trace_orbit(params: IrParams, forcing: SeasonalForcing, x_init=None, transient: Optional[float] = None,
                cfg: StepperConfig = StepperConfig(), closure_tol: float = 1e-4,
                max_retries: int = 3) -> PeriodicOrbit:
    """Integrate past a transient, then record one forcing period.

    The transient is rounded up to a whole number of periods so the recorded
    samples start at phase zero. It defaults to 50 periods and is doubled
    (by continuing the integration) up to ``max_retries`` times while the
    closure residual exceeds ``closure_tol``.
    """
    r0 = r0_of(params, forcing)
    if not r0 > 1.0:
        raise ValueError(f"orbit tracing needs R0 > 1, got {r0:.6g}")
    sigma = float(forcing.sigma)
    if transient is None:
        transient = 50.0 * sigma
    if transient < 10.0 * sigma * (1 - 1e-12):
        raise ValueError(f"transient must be at least 10 periods ({10 * sigma:.6g} weeks)")
    if x_init is None:
        x_init = equilibria(params, forcing.alpha).ee
    x = np.asarray(x_init, dtype=float)

    steps_per_period = max(1, math.ceil(sigma / cfg.h - 1e-9))
    h = sigma / steps_per_period
    periods = math.ceil(transient / sigma - 1e-9)
    done = 0
    for attempt in range(max_retries + 1):
        x = advance_ir(params, forcing, done * sigma, x, (periods - done) * steps_per_period, h, cfg)
        done = periods
        record = integrate_ir(params, forcing, done * sigma, (done + 1) * sigma, x,
                              StepperConfig(h, cfg.newton_tol, cfg.newton_max_iter))
        samples = np.column_stack([record.times - done * sigma, record.states])
        start, end = samples[0, 1:], samples[-1, 1:]
        residual = float(np.linalg.norm(end - start) / np.linalg.norm(start))
        if residual <= closure_tol:
            return PeriodicOrbit(sigma, samples, residual, done * sigma)
        periods *= 2
    raise NoConvergenceToOrbit(residual, done * sigma)


def phi_values(params: IrParams, I, R):
    nuN = params.nu * params.N
    q = I + nuN
    return -params.nu * I / q + params.nu * (params.N - I - R) / q * (1.0 - I / q)


def phi_profile(orbit: PeriodicOrbit, params: IrParams) -> np.ndarray:
    """Rows (t, Phi(t)) at every orbit sample."""
    s = orbit.samples
    return np.column_stack([s[:, 0], phi_values(params, s[:, 1], s[:, 2])])


def r_max(r0: float, phi, refine: bool = True) -> float:
    """``r0 * max Phi`` over the sampled profile.

    With ``refine`` a parabola through the argmax and its two neighbours
    replaces the sampled maximum when it bends downward.
    """
    phi = np.asarray(phi, dtype=float)
    values = phi[:, 1] if phi.ndim == 2 else phi
    if values.size == 0:
        raise ValueError("empty Phi profile")
    k = int(np.argmax(values))
    best = values[k]
    if refine and 0 < k < values.size - 1:
        left, right = values[k - 1], values[k + 1]
        curvature = left - 2.0 * best + right
        if curvature < 0:
            best = best - (right - left) ** 2 / (8.0 * curvature)
    return float(r0 * best)


def classify(r0: float, r_max_value: Optional[float]) -> Classification:
    if r0 < 1.0:
        return Classification.DIES_OUT
    if r0 > 1.0 and r_max_value is not None and r_max_value < 1.0:
        return Classification.STABLE_ENDEMIC_CYCLE
    return Classification.INCONCLUSIVE


def analyze_stability(params: IrParams, forcing: SeasonalForcing, cfg: StepperConfig = StepperConfig(),
                      transient: Optional[float] = None, x_init=None, verify: bool = True) -> StabilityReport:
    r0 = r0_of(params, forcing)
    _, mult = trivial_stability(params, forcing, cfg, verify=verify)
    orbit = None
    rm = None
    if r0 > 1.0:
        orbit = trace_orbit(params, forcing, x_init, transient, cfg)
        rm = r_max(r0, phi_profile(orbit, params))
    return StabilityReport(r0, rm, mult, classify(r0, rm), orbit)


def window_r_max(params: IrParams, forcing: SeasonalForcing, x0, t_end: float,
                 cfg: StepperConfig = StepperConfig()) -> float:
    """R0 * max Phi along the realised trajectory on [0, t_end] (no transient removed)."""
    traj = integrate_ir(params, forcing, 0.0, t_end, x0, cfg)
    phi = np.column_stack([traj.times, phi_values(params, traj.states[:, 0], traj.states[:, 1])])
    return r_max(r0_of(params, forcing), phi)
