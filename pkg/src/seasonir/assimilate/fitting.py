"""Multi-start fitting, cross-checking between schemes, and forecasting."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..integrate import IntegrationError, StepperConfig, integrate_ir
from ..model import FixedRates, basic_reproduction_number
from .sqp import NlpProblem, SqpOptions, SqpResult, SqpStatus, sqp_solve
from .transcription import (
    NU_FLOOR,
    OMEGA_FLOOR,
    CollocationProblem,
    DecisionVector,
    SchemeSpec,
    initial_guess,
)

NU_RANGE = (1e-6, 1e3)
ALPHA_RANGE = (1e-6, 1e3)
UNBOXED_OMEGA_SPREAD = 0.05


class AllStartsFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class FitOptions:
    tol: float = 1e-8
    max_iter: int = 400
    max_defect: float = 1e-6  # physical units (cases)

    def sqp_options(self, problem: CollocationProblem) -> SqpOptions:
        feas = min(1e-10, 0.5 * self.max_defect / float(np.max(problem.state_scale)))
        return SqpOptions(tol=self.tol, feas_tol=feas, max_iter=self.max_iter)


@dataclass(frozen=True)
class FitResult:
    scheme: SchemeSpec
    decision: DecisionVector
    objective: float
    sse: float
    r0: float
    iterations: int
    status: SqpStatus
    kkt_residual: float
    max_defect: float = 0.0
    start_index: int = 0
    origin: str = field(default="pool", compare=False)

    @property
    def converged(self) -> bool:
        return self.status is SqpStatus.CONVERGED

    def to_report(self) -> dict:
        return {
            "scheme": self.scheme.id.value,
            "parameters": self.decision.parameter_dict(),
            "sse": self.sse,
            "objective": self.objective,
            "r0": self.r0,
            "status": self.status.value,
            "iterations": self.iterations,
            "kkt_residual": self.kkt_residual,
            "max_defect": self.max_defect,
            "start_index": self.start_index,
            "origin": self.origin,
        }


def solve_from(problem: CollocationProblem, start: DecisionVector, options: FitOptions = FitOptions(),
               start_index: int = 0) -> FitResult:
    local = problem.rescaled_for(start)
    z0 = local.to_z(local.pack(start))
    try:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            res = sqp_solve(local, z0, options.sqp_options(local))
        v = local.to_v(res.x)
        status, iterations, kkt = res.status, res.iterations, res.kkt_residual
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError):
        v = local.pack(start)
        status, iterations, kkt = SqpStatus.LINE_SEARCH_FAIL, 0, math.inf
    dv = local.unpack(v)
    fx = problem.fixed
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        defect = float(np.max(np.abs(local.defects(v)), initial=0.0))
    if not np.isfinite(defect):
        defect = math.inf
    return FitResult(problem.scheme, dv, local.physical_objective(v), local.sse(v),
                     basic_reproduction_number(dv.alpha, fx.gamma, fx.mu, max(dv.nu, NU_FLOOR)),
                     iterations, status, kkt, defect, start_index)


# --- starting points ----------------------------------------------------------

def _omega_range(problem: CollocationProblem) -> list[tuple[float, float]]:
    sch = problem.scheme
    if sch.boxed:
        return sch.omega_bounds()
    return [(max(w - UNBOXED_OMEGA_SPREAD, OMEGA_FLOOR), w + UNBOXED_OMEGA_SPREAD) for w in sch.omega_star]


class _EquationError:
    """Integrated I-equation residual with I pinned to the data.

    For fixed (nu, R(0), omega) the infection-rate coefficients enter
    linearly, so alpha and delta follow from a small least-squares solve.
    """

    def __init__(self, problem: CollocationProblem):
        fx, h, d = problem.fixed, problem.h, problem.data
        self.fx, self.d, self.h, self.t = fx, d, h, problem.times
        mk = fx.mu + fx.kappa
        decay = (1 - 0.5 * h * mk) / (1 + 0.5 * h * mk)
        n = d.size
        self.R_part = np.zeros(n)
        self.R_hom = np.ones(n)
        for k in range(n - 1):
            self.R_part[k + 1] = decay * self.R_part[k] + 0.5 * h * fx.gamma * (d[k] + d[k + 1]) / (1 + 0.5 * h * mk)
            self.R_hom[k + 1] = decay * self.R_hom[k]
        self.lhs = d[1:] - d[:-1] + (fx.gamma + fx.mu) * 0.5 * h * (d[1:] + d[:-1])
        self.mf = problem.scheme.uses_slacks

    def solve(self, log_nu: float, rho: float, omegas) -> tuple[float, np.ndarray]:
        fx, d = self.fx, self.d
        R = self.R_part + rho * self.R_hom
        g = (fx.N - d - R) * d / (d + math.exp(log_nu) * fx.N)
        cols = [np.ones_like(d)] + [np.cos(2 * math.pi * w * self.t) for w in omegas]
        G = np.column_stack(cols) * g[:, None]
        A = 0.5 * self.h * (G[1:] + G[:-1])
        coef, *_ = np.linalg.lstsq(A, self.lhs, rcond=None)
        coef = _clip_amplitudes(coef, self.mf)
        return float(np.sum((A @ coef - self.lhs) ** 2)), coef


def _clip_amplitudes(coef, mf: bool):
    coef = np.array(coef, dtype=float)
    alpha = max(coef[0], 1e-12)
    deltas = coef[1:]
    if mf:
        total = np.abs(deltas).sum()
        if total > alpha:
            deltas = deltas * (alpha / total)
    else:
        deltas = np.clip(deltas, -alpha, alpha)
    return np.concatenate([[alpha], deltas])


def data_driven_start(problem: CollocationProblem, zoom_rounds: int = 3) -> DecisionVector:
    """Deterministic start from the integrated I-equation with I set to the data.

    A log grid over nu and R(0) is searched at the target frequencies, each
    frequency is then scanned over its admissible range, and the grid is
    refined around the best cell.
    """
    ee = _EquationError(problem)
    fx = problem.fixed
    omegas = list(problem.scheme.omega_star)
    log_nu = np.linspace(math.log(NU_RANGE[0]), math.log(NU_RANGE[1]), 91)
    rhos = np.concatenate([[0.0], np.geomspace(10.0, fx.N / 10, 25)])

    def grid(ln_values, rho_values, om):
        best = None
        for ln in ln_values:
            for rho in rho_values:
                score, coef = ee.solve(ln, rho, om)
                if best is None or score < best[0]:
                    best = (score, ln, rho, coef)
        return best

    best = grid(log_nu, rhos, omegas)
    n_span = problem.times[-1] - problem.times[0]
    for j, (lo, hi) in enumerate(_omega_range(problem)):
        step = 1.0 / (4.0 * max(n_span, 1.0))
        candidates = np.union1d(np.arange(lo, hi + 0.5 * step, step), [omegas[j]])
        scores = []
        for w in candidates:
            trial = list(omegas)
            trial[j] = float(w)
            scores.append(ee.solve(best[1], best[2], trial)[0])
        omegas[j] = float(candidates[int(np.argmin(scores))])
    best = grid([best[1]], [best[2]], omegas)
    d_ln = log_nu[1] - log_nu[0]
    for _ in range(zoom_rounds):
        ln_values = np.linspace(best[1] - d_ln, best[1] + d_ln, 11)
        k = int(np.searchsorted(rhos, best[2]))
        rho_lo = rhos[max(k - 1, 0)]
        rho_hi = rhos[min(k + 1, rhos.size - 1)]
        rhos = np.linspace(rho_lo, rho_hi, 11)
        best = grid(ln_values, rhos, omegas)
        d_ln /= 5.0
    _, ln, rho, coef = best
    return initial_guess(problem, coef[0], coef[1:], omegas, math.exp(ln), float(problem.data[0]), rho)


def random_start(problem: CollocationProblem, rng: np.random.Generator) -> DecisionVector:
    """Start drawn from the wide sampling box, clipped to feasibility."""
    m = problem.m
    alpha = 10 ** rng.uniform(*np.log10(ALPHA_RANGE))
    nu = 10 ** rng.uniform(*np.log10(NU_RANGE))
    bound = alpha / m if problem.scheme.uses_slacks else alpha
    deltas = rng.uniform(-bound, bound, size=m)
    omegas = [max(rng.uniform(lo, hi), OMEGA_FLOOR) for lo, hi in _omega_range(problem)]
    if problem.scheme.boxed:
        omegas = [min(max(w, lo), hi) for w, (lo, hi) in zip(omegas, problem.scheme.omega_bounds())]
    I0 = rng.uniform(0.0, float(problem.data.max()))
    R0 = rng.uniform(0.0, problem.fixed.N / 10)
    return initial_guess(problem, alpha, deltas, omegas, nu, I0, R0)


def start_pool(problem: CollocationProblem, pool_size: int, seed: int) -> list[DecisionVector]:
    """Start 0 is the data-driven estimate; the rest are seeded random draws."""
    if pool_size < 1:
        raise ValueError("pool_size must be at least 1")
    rng = np.random.default_rng(seed)
    starts = [data_driven_start(problem)]
    starts += [random_start(problem, rng) for _ in range(pool_size - 1)]
    return starts


# --- multi-start and cross-checking -------------------------------------------

def _solve_task(args):
    problem, start, options, index = args
    return solve_from(problem, start, options, index)


def _best(results: Sequence[FitResult]) -> Optional[FitResult]:
    ok = [r for r in results if r.converged and np.isfinite(r.objective)]
    if not ok:
        return None
    return min(ok, key=lambda r: (r.objective, r.start_index))


def multi_start(problem: CollocationProblem, pool_size: int = 50, seed: int = 0,
                options: FitOptions = FitOptions(), jobs: int = 1,
                return_all: bool = False):
    """Best converged fit over a seeded start pool (ties go to the lower start index)."""
    starts = start_pool(problem, pool_size, seed)
    tasks = [(problem, s, options, i) for i, s in enumerate(starts)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_solve_task, tasks))
    else:
        results = [_solve_task(t) for t in tasks]
    best = _best(results)
    if best is None:
        raise AllStartsFailed(f"none of {pool_size} starts converged")
    return (best, results) if return_all else best


def sqp_multi_start(problem: NlpProblem, starts: Sequence[np.ndarray],
                    options: SqpOptions = SqpOptions()) -> tuple[int, list[SqpResult]]:
    """Index of the best converged local solve over explicit starts, and every result.

    The same selection rule as :func:`multi_start` (objective, then start
    index) for problems that are not collocation transcriptions.
    """
    results = [sqp_solve(problem, x0, options) for x0 in starts]
    ok = [(r.f, i) for i, r in enumerate(results) if r.converged and np.isfinite(r.f)]
    if not ok:
        raise AllStartsFailed(f"none of {len(starts)} starts converged")
    return min(ok)[1], results


def project_start(problem: CollocationProblem, dv: DecisionVector) -> DecisionVector:
    """Map another scheme's optimum into ``problem``'s feasible set.

    Collocation states are reused when the grids match; otherwise they are
    re-simulated from the projected parameters.
    """
    sch = problem.scheme
    if len(dv.deltas) != sch.m:
        raise ValueError("harmonic counts differ")
    alpha = max(dv.alpha, 1e-12)
    deltas = np.array(dv.deltas, dtype=float)
    if sch.uses_slacks:
        total = np.abs(deltas).sum()
        if total > alpha:
            deltas *= alpha / total
    else:
        deltas = np.clip(deltas, -alpha, alpha)
    omegas = [min(max(w, lo), hi) for w, (lo, hi) in zip(dv.omegas, sch.omega_bounds())]
    nu = max(dv.nu, NU_FLOOR)
    R0 = max(dv.R0_init, 0.0) if sch.enforce_r0_positivity else dv.R0_init
    unchanged = (alpha == dv.alpha and np.array_equal(deltas, dv.deltas) and list(omegas) == list(dv.omegas)
                 and nu == dv.nu and R0 == dv.R0_init)
    if unchanged and dv.nodes.shape == (problem.n_nodes, 2) and np.all(dv.nodes[:, 0] >= 0):
        slacks = dv.slacks if sch.uses_slacks and len(dv.slacks) == sch.m else \
            (tuple(np.abs(deltas)) if sch.uses_slacks else ())
        return replace(dv, slacks=tuple(slacks))
    return initial_guess(problem, alpha, deltas, omegas, nu, max(dv.I0, 0.0), R0)


@dataclass
class CrossCheckLog:
    attempted: int = 0
    skipped: int = 0
    improved: list = field(default_factory=list)


def cross_check(problems: Sequence[CollocationProblem], results: Sequence[Optional[FitResult]],
                options: FitOptions = FitOptions()):
    """Reseed every scheme from every other scheme's optimum; keep the better objective.

    Returns the updated results and a :class:`CrossCheckLog`. Pairs with
    different harmonic counts are skipped; failed reseeds keep the incumbent.
    """
    if len(problems) != len(results) or len(problems) < 2:
        raise ValueError("cross_check needs at least two (problem, result) pairs")
    log = CrossCheckLog()
    updated = list(results)
    for i, prob in enumerate(problems):
        for j, donor in enumerate(results):
            if i == j or donor is None:
                continue
            if donor.scheme.m != prob.scheme.m:
                log.skipped += 1
                continue
            log.attempted += 1
            try:
                start = project_start(prob, donor.decision)
            except ValueError:
                continue
            trial = solve_from(prob, start, options, start_index=-1)
            incumbent = updated[i]
            if not trial.converged:
                continue
            if incumbent is None or trial.objective < incumbent.objective * (1 - 1e-12) - 1e-300:
                updated[i] = replace(trial, origin=f"cross-check from {donor.scheme.id.value}")
                log.improved.append((prob.scheme.id.value, donor.scheme.id.value))
    return updated, log


# --- forecasting -------------------------------------------------------------

def forecast(decision: DecisionVector, fixed: FixedRates, weeks: int,
             cfg: StepperConfig = StepperConfig(h=0.25)) -> np.ndarray:
    """Weekly (I, R) from the fitted initial state for ``weeks`` weeks (weeks + 1 rows)."""
    if weeks < 1:
        raise ValueError("weeks must be at least 1")
    steps_per_week = max(1, round(1.0 / cfg.h))
    h = 1.0 / steps_per_week
    traj = integrate_ir(decision.params(fixed), decision.forcing(), 0.0, float(weeks),
                        (decision.I0, decision.R0_init), StepperConfig(h, cfg.newton_tol, cfg.newton_max_iter),
                        record_every=steps_per_week)
    if traj.states.shape[0] != weeks + 1:
        raise IntegrationError("unexpected forecast grid", float(weeks))
    return traj.states
