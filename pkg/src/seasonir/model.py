"""Seasonally forced IR model and its SIRUV host-vector parent.

All rates are per week. The infection rate is

    beta(t) = alpha + sum_j delta_j * cos(2 pi omega_j t)

with every omega_j held as an exact rational so that the common period
sigma (the least common multiple of the 1/omega_j) is exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from functools import reduce
from typing import NamedTuple, Optional, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class FixedRates:
    """Demographic and clinical constants taken as known during a fit."""

    N: float = 1e7
    mu: float = 1.0 / 3120.0
    gamma: float = 0.25
    kappa: float = 1.0 / 36.0

    def __post_init__(self):
        for name in ("N", "mu", "gamma", "kappa"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class IrParams(FixedRates):
    nu: float = 0.5

    def __post_init__(self):
        super().__post_init__()
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise ValueError(f"nu must be positive and finite, got {self.nu}")

    @property
    def fixed(self) -> FixedRates:
        return FixedRates(self.N, self.mu, self.gamma, self.kappa)

    @classmethod
    def from_fixed(cls, fixed: FixedRates, nu: float) -> "IrParams":
        return cls(fixed.N, fixed.mu, fixed.gamma, fixed.kappa, nu)


@dataclass(frozen=True)
class SiruvParams(FixedRates):
    Lambda: float = 1.0
    rho: float = 1.0
    theta: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        for name in ("Lambda", "rho", "theta"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if self.theta <= self.mu:
            warnings.warn("theta <= mu: mosquito dynamics are not fast relative to humans; "
                          "the quasi-steady-state reduction is questionable", stacklevel=2)

    @property
    def nu(self) -> float:
        return self.theta / self.rho

    def reduced(self) -> IrParams:
        return IrParams(self.N, self.mu, self.gamma, self.kappa, self.nu)


def as_fraction(x, decimals: Optional[int] = None) -> Fraction:
    """Exact rational value of a decimal number.

    Floats are read through their shortest round-trip decimal form, so
    ``0.017822`` becomes ``17822/1000000`` rather than its binary expansion.
    ``decimals`` rounds to that many digits after the point first.
    """
    if isinstance(x, Fraction) and decimals is None:
        return x
    if isinstance(x, Fraction):
        dec = Decimal(x.numerator) / Decimal(x.denominator)
    elif isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite frequency {x}")
        dec = Decimal(repr(float(x)))
    else:
        dec = Decimal(str(x))
    if decimals is not None:
        dec = dec.quantize(Decimal(1).scaleb(-decimals), rounding=ROUND_HALF_EVEN)
    return Fraction(dec)


def common_period(omegas: Sequence[Fraction]) -> Fraction:
    """Least common multiple of the periods 1/omega_j over the rationals."""
    if not omegas:
        return Fraction(1)
    periods = [1 / Fraction(w) for w in omegas]
    num = reduce(math.lcm, (p.numerator for p in periods))
    den = reduce(math.gcd, (p.denominator for p in periods))
    return Fraction(num, den)


@dataclass(frozen=True)
class SeasonalForcing:
    """Infection rate ``alpha + sum delta_j cos(2 pi omega_j t)``."""

    alpha: float
    deltas: tuple = ()
    omegas: tuple = ()
    _omega_f: np.ndarray = field(init=False, repr=False, compare=False)
    _delta_f: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        deltas = tuple(float(d) for d in self.deltas)
        omegas = tuple(as_fraction(w) for w in self.omegas)
        if len(deltas) != len(omegas):
            raise ValueError("deltas and omegas must have equal length")
        if any(w <= 0 for w in omegas):
            raise ValueError("frequencies must be positive")
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "_omega_f", np.array([float(w) for w in omegas]))
        object.__setattr__(self, "_delta_f", np.array(deltas))
        if self.alpha < sum(abs(d) for d in deltas):
            warnings.warn("alpha < sum|delta_j|: beta(t) can become negative", stacklevel=3)

    @classmethod
    def build(cls, alpha, deltas=(), omegas=(), decimals: Optional[int] = None) -> "SeasonalForcing":
        return cls(alpha, tuple(deltas), tuple(as_fraction(w, decimals) for w in omegas))

    @classmethod
    def constant(cls, alpha: float) -> "SeasonalForcing":
        return cls(alpha)

    @property
    def m(self) -> int:
        return len(self.deltas)

    @property
    def harmonics(self) -> list[tuple[float, Fraction]]:
        return list(zip(self.deltas, self.omegas))

    @property
    def sigma(self) -> Fraction:
        return common_period(self.omegas)

    @property
    def omega_values(self) -> np.ndarray:
        return self._omega_f

    @property
    def delta_values(self) -> np.ndarray:
        return self._delta_f

    def with_alpha(self, alpha: float) -> "SeasonalForcing":
        return replace(self, alpha=alpha)

    def __call__(self, t):
        return forcing_eval(self, t)


def forcing_eval(forcing: SeasonalForcing, t):
    t_arr = np.asarray(t, dtype=float)
    if forcing.m == 0:
        out = np.full(t_arr.shape, forcing.alpha)
    else:
        phase = TWO_PI * np.multiply.outer(t_arr, forcing._omega_f)
        out = forcing.alpha + np.cos(phase) @ forcing._delta_f
    return float(out) if out.ndim == 0 else out


class HumanState(NamedTuple):
    I: float
    R: float

    def check(self, params: FixedRates, tol: float = 1e-9) -> None:
        scale = tol * params.N
        if self.I < -scale or self.R < -scale or self.I + self.R > params.N + scale:
            raise ValueError(f"state {self} violates 0 <= I, R and I + R <= N")


class SiruvState(NamedTuple):
    S: float
    I: float
    R: float
    U: float
    V: float


class Equilibria(NamedTuple):
    dfe: HumanState
    ee: Optional[HumanState]


def basic_reproduction_number(alpha: float, gamma: float, mu: float, nu: float) -> float:
    return alpha / ((gamma + mu) * nu)


def r0_of(params: IrParams, forcing: SeasonalForcing) -> float:
    return basic_reproduction_number(forcing.alpha, params.gamma, params.mu, params.nu)


def ir_rhs(params: IrParams, forcing: SeasonalForcing, t: float, x) -> np.ndarray:
    I, R = x[0], x[1]
    beta = forcing_eval(forcing, t)
    dI = beta * (params.N - I - R) * I / (I + params.nu * params.N) - (params.gamma + params.mu) * I
    dR = params.gamma * I - (params.mu + params.kappa) * R
    return np.array([dI, dR])


def ir_jacobian(params: IrParams, forcing: SeasonalForcing, t: float, x) -> np.ndarray:
    """Jacobian of :func:`ir_rhs` with respect to (I, R)."""
    I, R = x[0], x[1]
    beta = forcing_eval(forcing, t)
    nuN = params.nu * params.N
    q = I + nuN
    return np.array([
        [beta * (-I / q + (params.N - I - R) * nuN / q**2) - params.gamma - params.mu, -beta * I / q],
        [params.gamma, -params.mu - params.kappa],
    ])


def autonomous_jacobian(params: IrParams, alpha: float, x) -> np.ndarray:
    return ir_jacobian(params, SeasonalForcing.constant(alpha), 0.0, x)


def equilibria(params: IrParams, alpha: float) -> Equilibria:
    """Disease-free and (when R0 > 1) endemic equilibrium of the autonomous part."""
    dfe = HumanState(0.0, 0.0)
    N, mu, gamma, kappa, nu = params.N, params.mu, params.gamma, params.kappa, params.nu
    r0 = basic_reproduction_number(alpha, gamma, mu, nu)
    if not r0 > 1.0:
        return Equilibria(dfe, None)
    excess = (gamma + mu) * nu * (r0 - 1.0)
    den = (alpha + mu) * (gamma + mu + kappa) + gamma * kappa
    return Equilibria(dfe, HumanState(N * (mu + kappa) * excess / den, N * gamma * excess / den))


def siruv_rhs(params: SiruvParams, forcing: SeasonalForcing, t: float, x) -> np.ndarray:
    S, I, R, U, V = (x[k] for k in range(5))
    N, mu, gamma, kappa = params.N, params.mu, params.gamma, params.kappa
    beta = forcing_eval(forcing, t)
    infection = beta / (U + V) * S * V
    bites = params.rho / N * U * I
    return np.array([
        mu * (N - S) - infection + kappa * R,
        infection - (gamma + mu) * I,
        gamma * I - (mu + kappa) * R,
        params.Lambda - bites - params.theta * U,
        bites - params.theta * V,
    ])


def qssa_vector(params: SiruvParams, I: float) -> tuple[float, float]:
    """Mosquito compartments slaved to the human infective count."""
    if I < 0:
        raise ValueError("I must be nonnegative")
    denom = params.theta * params.N + params.rho * I
    U = params.Lambda * params.N / denom
    V = params.rho * params.Lambda * I / (params.theta * denom)
    return U, V
