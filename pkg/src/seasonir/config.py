"""Plain-text ``key = value`` configuration for the command-line pipeline."""

from __future__ import annotations

import dataclasses
import hashlib
import os
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .assimilate.transcription import DEFAULT_LAMBDA, OMEGA_STAR, SchemeId, SchemeSpec
from .integrate import StepperConfig
from .io import dumps
from .model import FixedRates
from .timeseries import FilterSpec


class ConfigError(ValueError):
    pass


def parse_key_values(text: str, source: str = "<config>") -> dict[str, str]:
    """Raw ``key -> value`` strings; a later key overrides an earlier one."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key.lower()] = value
    return out


def read_key_values(path) -> dict[str, str]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return parse_key_values(fh.read(), str(path))


def parse_number(text: str) -> float:
    """Float from decimal, exponent or ``p/q`` notation."""
    try:
        return float(Fraction(text.strip())) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {text!r}") from None


def parse_exact(text: str) -> Fraction:
    """Exact rational from decimal or ``p/q`` text (frequencies must stay exact for the period)."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {text!r}") from None


def parse_list(text: str, exact: bool = False) -> tuple:
    if not text.strip():
        return ()
    convert = parse_exact if exact else parse_number
    return tuple(convert(tok) for tok in text.split(","))


def parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_scheme(text: str) -> SchemeId:
    token = text.strip().upper()
    if token.isdigit():
        token = "S" + token
    try:
        return SchemeId(token)
    except ValueError:
        raise ConfigError(f"unknown scheme {text!r} (use 1, 2, 3, 4 or mf)") from None


@dataclass(frozen=True)
class SynthParams:
    """A known IR system used to generate synthetic incidence."""

    fixed: FixedRates
    nu: float
    alpha: float
    deltas: tuple
    omegas: tuple
    I0: float
    R0: float

    @classmethod
    def from_mapping(cls, kv: dict[str, str]) -> "SynthParams":
        fixed = fixed_from_mapping(kv)
        try:
            return cls(fixed, parse_number(kv["nu"]), parse_number(kv["alpha"]),
                       parse_list(kv.get("deltas", "")), parse_list(kv.get("omegas", ""), exact=True),
                       parse_number(kv.get("i0", "1")), parse_number(kv.get("r0", "0")))
        except KeyError as exc:
            raise ConfigError(f"parameter file lacks required key {exc.args[0]!r}") from None


def fixed_from_mapping(kv: dict[str, str], base: FixedRates = FixedRates()) -> FixedRates:
    try:
        return FixedRates(N=parse_number(kv["n"]) if "n" in kv else base.N,
                          mu=parse_number(kv["mu"]) if "mu" in kv else base.mu,
                          gamma=parse_number(kv["gamma"]) if "gamma" in kv else base.gamma,
                          kappa=parse_number(kv["kappa"]) if "kappa" in kv else base.kappa)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class Config:
    input: Optional[str] = None
    output_dir: str = "."
    fixed: FixedRates = FixedRates()
    scheme: SchemeId = SchemeId.S2
    lam: Optional[float] = None
    epsilon: float = 1e-2
    omega_star: tuple = (OMEGA_STAR,)
    positivity: bool = False
    stepper: StepperConfig = StepperConfig()
    n_train: Optional[int] = None
    filter_spec: FilterSpec = FilterSpec()
    pool: int = 50
    seed: int = 0
    horizon: int = 52
    jobs: int = 1
    omega_decimals: int = 5
    tol: float = 1e-8
    max_iter: int = 400

    def __post_init__(self):
        if self.pool < 1:
            raise ConfigError("pool must be at least 1")
        if self.horizon < 0:
            raise ConfigError("horizon must be nonnegative")
        if self.n_train is not None and self.n_train < 8:
            raise ConfigError("n_train must be at least 8")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.omega_decimals < 0:
            raise ConfigError("omega_decimals must be nonnegative")
        self.scheme_spec()  # validates the scheme fields

    @property
    def resolved_lambda(self) -> float:
        return DEFAULT_LAMBDA[self.scheme] if self.lam is None else self.lam

    def scheme_spec(self) -> SchemeSpec:
        try:
            return SchemeSpec.named(self.scheme, self.omega_star, self.lam, self.epsilon, self.positivity)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_mapping(cls, kv: dict[str, str]) -> "Config":
        known = {"input", "output_dir", "n", "mu", "gamma", "kappa", "scheme", "lambda", "epsilon",
                 "omega_star", "positivity", "h", "newton_tol", "newton_max_iter", "n_train",
                 "filter_window", "pool", "seed", "horizon", "jobs", "omega_decimals", "tol", "max_iter"}
        unknown = sorted(set(kv) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        base = cls()
        try:
            stepper = StepperConfig(
                h=parse_number(kv["h"]) if "h" in kv else base.stepper.h,
                newton_tol=parse_number(kv["newton_tol"]) if "newton_tol" in kv else base.stepper.newton_tol,
                newton_max_iter=int(kv.get("newton_max_iter", base.stepper.newton_max_iter)))
            return cls(
                input=kv.get("input", base.input),
                output_dir=kv.get("output_dir", base.output_dir),
                fixed=fixed_from_mapping(kv),
                scheme=parse_scheme(kv["scheme"]) if "scheme" in kv else base.scheme,
                lam=parse_number(kv["lambda"]) if "lambda" in kv else None,
                epsilon=parse_number(kv["epsilon"]) if "epsilon" in kv else base.epsilon,
                omega_star=parse_list(kv["omega_star"]) if "omega_star" in kv else base.omega_star,
                positivity=parse_bool(kv["positivity"]) if "positivity" in kv else base.positivity,
                stepper=stepper,
                n_train=int(kv["n_train"]) if "n_train" in kv else None,
                filter_spec=FilterSpec(int(kv.get("filter_window", base.filter_spec.window))),
                pool=int(kv.get("pool", base.pool)),
                seed=int(kv.get("seed", base.seed)),
                horizon=int(kv.get("horizon", base.horizon)),
                jobs=int(kv.get("jobs", base.jobs)),
                omega_decimals=int(kv.get("omega_decimals", base.omega_decimals)),
                tol=parse_number(kv["tol"]) if "tol" in kv else base.tol,
                max_iter=int(kv.get("max_iter", base.max_iter)),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: Optional[os.PathLike]) -> "Config":
        return cls() if path is None else cls.from_mapping(read_key_values(path))

    def override(self, **changes) -> "Config":
        """Copy with every non-None keyword applied (command-line flags win)."""
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> dict:
        return {
            "input": self.input,
            "output_dir": self.output_dir,
            "N": self.fixed.N, "mu": self.fixed.mu, "gamma": self.fixed.gamma, "kappa": self.fixed.kappa,
            "scheme": self.scheme.value,
            "lambda": self.resolved_lambda,
            "epsilon": self.epsilon,
            "omega_star": list(self.omega_star),
            "positivity": self.positivity,
            "h": self.stepper.h, "newton_tol": self.stepper.newton_tol,
            "newton_max_iter": self.stepper.newton_max_iter,
            "n_train": self.n_train,
            "filter_window": self.filter_spec.window,
            "pool": self.pool,
            "seed": self.seed,
            "horizon": self.horizon,
            "omega_decimals": self.omega_decimals,
            "tol": self.tol,
            "max_iter": self.max_iter,
        }

    def digest(self) -> str:
        # jobs changes scheduling only, never results, so it stays out of the hash
        return hashlib.sha256(dumps(self.to_dict()).encode()).hexdigest()


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
