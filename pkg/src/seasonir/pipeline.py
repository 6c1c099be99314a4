"""Library side of the command-line pipeline: synthesis, fitting, forecasting, reporting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import __version__
from .assimilate.fitting import FitOptions, FitResult, multi_start
from .assimilate.transcription import transcribe
from .config import Config, SynthParams
from .floquet import StabilityReport, analyze_stability
from .integrate import StepperConfig, Trajectory, integrate_ir
from .model import FixedRates, IrParams, SeasonalForcing, as_fraction
from .timeseries import Cadence, IncidenceSeries, Provenance, split_train_test

SYNTH_STEP = 0.125


class NotConverged(RuntimeError):
    pass


class ReportError(ValueError):
    """A report file is missing fields or belongs to a different stage."""


def synthesize(sp: SynthParams, weeks: int, seed: int = 0, noise: str = "none",
               h: float = SYNTH_STEP) -> IncidenceSeries:
    """Weekly samples I(0), ..., I(weeks - 1) of a known IR system.

    ``noise = "poisson"`` replaces each value by a Poisson draw with that mean
    (seeded); the default is exact model output.
    """
    if weeks < 1:
        raise ValueError("weeks must be at least 1")
    steps = round(1.0 / h)
    if not math.isclose(steps * h, 1.0):
        raise ValueError("h must divide one week")
    params = IrParams.from_fixed(sp.fixed, sp.nu)
    forcing = SeasonalForcing.build(sp.alpha, sp.deltas, sp.omegas)
    traj = integrate_ir(params, forcing, 0.0, float(weeks - 1), (sp.I0, sp.R0), StepperConfig(h=h),
                        record_every=steps)
    counts = np.maximum(traj.states[:, 0], 0.0)
    if noise == "poisson":
        counts = np.random.default_rng(seed).poisson(counts).astype(float)
    elif noise != "none":
        raise ValueError(f"unknown noise model {noise!r}")
    return IncidenceSeries(Cadence.WEEKLY, np.arange(weeks), counts, Provenance.SYNTHETIC)


def training_window(series: IncidenceSeries, n_train: Optional[int]) -> IncidenceSeries:
    if series.cadence is not Cadence.WEEKLY:
        raise ValueError("fitting needs a weekly series (run ingest first)")
    if n_train is None or n_train == len(series):
        return series
    return split_train_test(series, n_train)[0]


def fit_options(config: Config) -> FitOptions:
    return FitOptions(tol=config.tol, max_iter=config.max_iter)


def run_fit(config: Config, series: IncidenceSeries, data_digest: str = "") -> tuple[FitResult, dict]:
    """Multi-start fit of one scheme and its JSON-ready report."""
    train = training_window(series, config.n_train)
    problem = transcribe(config.scheme_spec(), train, config.fixed)
    result = multi_start(problem, config.pool, config.seed, fit_options(config), jobs=config.jobs)
    report = result.to_report()
    report["lambda"] = config.resolved_lambda
    report["fixed"] = fixed_dict(config.fixed)
    report["n_train"] = len(train)
    report["provenance"] = provenance(config, data_digest)
    return result, report


def fixed_dict(fixed: FixedRates) -> dict:
    return {"N": fixed.N, "mu": fixed.mu, "gamma": fixed.gamma, "kappa": fixed.kappa}


def provenance(config: Config, data_digest: str = "") -> dict:
    return {"config_hash": config.digest(), "data_hash": data_digest, "seed": config.seed,
            "tool": "seasonir", "version": __version__}


@dataclass(frozen=True)
class FittedSystem:
    """The parts of a fit report needed to re-simulate or analyse the fitted model."""

    fixed: FixedRates
    nu: float
    alpha: float
    deltas: tuple
    omegas: tuple
    I0: float
    R0_init: float
    status: str = "Converged"
    n_train: int = 1

    @classmethod
    def from_report(cls, report: dict) -> "FittedSystem":
        try:
            p = report["parameters"]
            f = report["fixed"]
            return cls(FixedRates(f["N"], f["mu"], f["gamma"], f["kappa"]), float(p["nu"]),
                       float(p["alpha"]), tuple(map(float, p["deltas"])), tuple(map(float, p["omegas"])),
                       float(p["I0"]), float(p["R0"]), str(report["status"]), int(report["n_train"]))
        except (KeyError, TypeError) as exc:
            raise ReportError(f"not a fit report (missing {exc})") from None

    @classmethod
    def from_synth(cls, sp: SynthParams, n_train: int = 1) -> "FittedSystem":
        return cls(sp.fixed, sp.nu, sp.alpha, sp.deltas, sp.omegas, sp.I0, sp.R0, "Converged", n_train)

    @property
    def params(self) -> IrParams:
        return IrParams.from_fixed(self.fixed, self.nu)

    def forcing(self, decimals: Optional[int] = None) -> SeasonalForcing:
        """Forcing with float frequencies rounded to ``decimals``; exact rationals are kept."""
        omegas = [w if isinstance(w, Fraction) else as_fraction(w, decimals) for w in self.omegas]
        return SeasonalForcing.build(self.alpha, self.deltas, omegas)


@dataclass(frozen=True)
class Forecast:
    trajectory: Trajectory
    train_end: float  # last training week T; later times form the test window

    @property
    def test_mask(self) -> np.ndarray:
        return self.trajectory.times > self.train_end


def forecast(fit: FittedSystem, horizon: float, cfg: StepperConfig = StepperConfig()) -> Forecast:
    """Fitted trajectory over [0, T + horizon] sampled weekly, T the last training week."""
    if fit.status != "Converged":
        raise NotConverged(f"fit status is {fit.status}, forecasting needs a converged fit")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    steps_per_week = max(1, math.ceil(1.0 / cfg.h - 1e-9))
    h = 1.0 / steps_per_week
    T = float(fit.n_train - 1)
    traj = integrate_ir(fit.params, fit.forcing(), 0.0, T + horizon, (fit.I0, fit.R0_init),
                        StepperConfig(h, cfg.newton_tol, cfg.newton_max_iter), record_every=steps_per_week)
    return Forecast(traj, T)


def stability(fit: FittedSystem, config: Config) -> StabilityReport:
    return analyze_stability(fit.params, fit.forcing(config.omega_decimals), config.stepper)


def assemble_report(fit_report: dict, stability_report: Optional[dict], forecast_files: list[str]) -> dict:
    """Final summary built only from files written by earlier pipeline stages."""
    if "parameters" not in fit_report:
        raise ReportError("first input is not a fit report")
    if stability_report is not None and "classification" not in stability_report:
        raise ReportError("stability input is not a stability report")
    summary = {key: fit_report[key] for key in ("scheme", "parameters", "sse", "r0", "status",
                                                "iterations", "kkt_residual") if key in fit_report}
    return {
        "fits": [summary],
        "stability": stability_report,
        "forecast_files": list(forecast_files),
        "provenance": fit_report.get("provenance", {}),
    }
