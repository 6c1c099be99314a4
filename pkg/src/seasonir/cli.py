"""``seasonir`` command-line tool.

Exit codes: 0 success, 1 usage or input error (including missing files),
2 numerical failure. Errors go to standard error as
``seasonir: error[<code>]: <message>``.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date, timedelta
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .assimilate.fitting import AllStartsFailed
from .config import (Config, ConfigError, SynthParams, file_digest, fixed_from_mapping, parse_list, parse_scheme,
                     read_key_values)
from .floquet import MultiplierMismatch, NoConvergenceToOrbit, phi_profile
from .integrate import IntegrationError, StepperConfig
from .io import atomic_write_text, format_float, write_csv, write_json
from .pipeline import (FittedSystem, NotConverged, ReportError, assemble_report, forecast, run_fit,
                       stability, synthesize)
from .spectral import NoPeaksFound, dft_magnitude, format_spectrum, top_peaks
from .svg import line_chart
from .timeseries import (Cadence, FilterSpec, IncidenceSeries, aggregate_weekly, moving_average, parse_series_lines,
                         write_series)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _input_path(path: Optional[str], what: str) -> Path:
    if not path:
        raise UsageError(f"no {what} given")
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} not found: {p}")
    return p


def _out_path(args, config: Config, default_name: str) -> Path:
    return Path(args.out) if args.out else Path(config.output_dir) / default_name


def _load_config(args) -> Config:
    if args.config:
        _input_path(args.config, "config file")
    return Config.load(args.config)


def _read_series(path: Path, cadence: Cadence = Cadence.WEEKLY) -> IncidenceSeries:
    with open(path, encoding="utf-8", newline=None) as fh:
        return parse_series_lines(fh, cadence)


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ReportError(f"{path}: not valid JSON ({exc.msg})") from None


# --- subcommands -------------------------------------------------------------

def cmd_ingest(args, config: Config) -> None:
    path = _input_path(args.input or config.input, "input CSV")
    series = _read_series(path, Cadence(args.cadence))
    if series.cadence is Cadence.DAILY:
        series = aggregate_weekly(series)
    write_series(_out_path(args, config, "weekly.csv"), series)


def cmd_filter(args, config: Config) -> None:
    path = _input_path(args.input or config.input, "input CSV")
    spec = FilterSpec(args.window) if args.window is not None else config.filter_spec
    series = moving_average(_read_series(path), spec)
    write_series(_out_path(args, config, "filtered.csv"), series)


def cmd_spectrum(args, config: Config) -> None:
    path = _input_path(args.input or config.input, "input CSV")
    spec = dft_magnitude(_read_series(path))
    peaks = top_peaks(spec, args.peaks, args.min_separation)
    out = _out_path(args, config, "spectrum.csv")
    atomic_write_text(out, format_spectrum(spec, peaks))
    if args.svg:
        atomic_write_text(out.with_suffix(".svg"),
                          line_chart({"|X|": (spec.frequencies, spec.magnitudes)}, "magnitude spectrum",
                                     xlabel="frequency (1/week)", ylabel="magnitude"))


def cmd_fit(args, config: Config) -> None:
    path = _input_path(args.train_csv or config.input, "training CSV")
    fixed = config.fixed
    if args.params_file:
        fixed = fixed_from_mapping(read_key_values(_input_path(args.params_file, "parameter file")), fixed)
    try:
        config = config.override(
            input=str(path), fixed=fixed,
            scheme=parse_scheme(args.scheme) if args.scheme else None,
            lam=args.lam, epsilon=args.epsilon,
            omega_star=parse_list(args.omega_star) if args.omega_star else None,
            positivity=True if args.positivity else None,
            pool=args.pool, seed=args.seed, n_train=args.n_train, jobs=args.jobs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    series = _read_series(path)
    _, report = run_fit(config, series, file_digest(path))
    write_json(_out_path(args, config, "fit.json"), report)


def _fitted_system(args) -> FittedSystem:
    if args.fit:
        return FittedSystem.from_report(_read_json(_input_path(args.fit, "fit report")))
    if args.params_file:
        kv = read_key_values(_input_path(args.params_file, "parameter file"))
        return FittedSystem.from_synth(SynthParams.from_mapping(kv), int(kv.get("n_train", "1")))
    raise UsageError("give --fit REPORT or --params-file FILE")


def cmd_stability(args, config: Config) -> None:
    fit = _fitted_system(args)
    config = config.override(omega_decimals=args.omega_decimals,
                             stepper=StepperConfig(args.h) if args.h is not None else None)
    rep = stability(fit, config)
    out = _out_path(args, config, "stability.json")
    body = rep.to_dict()
    body["omega_decimals"] = config.omega_decimals
    write_json(out, body)
    if args.phi_csv and rep.orbit is not None:
        prof = phi_profile(rep.orbit, fit.params)
        write_csv(args.phi_csv, ["t", "I", "R", "phi"],
                  [(t, i, r, p) for (t, i, r), p in zip(rep.orbit.samples.tolist(), prof[:, 1].tolist())])


def cmd_forecast(args, config: Config) -> None:
    fit = _fitted_system(args)
    data = _read_series(_input_path(args.data, "data CSV")) if args.data else None
    horizon = args.horizon if args.horizon is not None else config.horizon
    fc = forecast(fit, horizon, StepperConfig(args.h) if args.h is not None else config.stepper)
    traj = fc.trajectory
    observed = {}
    if data is not None:
        observed = {float(i): float(c) for i, c in zip(data.index - data.index[0], data.counts)}
    rows = []
    for t, (I, R), test in zip(traj.times.tolist(), traj.states.tolist(), fc.test_mask.tolist()):
        obs = observed.get(t)
        row = (t, I, R, "test" if test else "train", "" if obs is None else format_float(obs))
        if args.start_date:
            row += ((args.start_date + timedelta(weeks=t)).isoformat(),)
        rows.append(row)
    out = _out_path(args, config, "forecast.csv")
    header = ["t", "I", "R", "segment", "data"] + (["date"] if args.start_date else [])
    write_csv(out, header, rows)
    if args.svg:
        curves = {"model I": (traj.times, traj.states[:, 0])}
        if data is not None:
            curves["data"] = (np.arange(len(data), dtype=float), data.counts)
        atomic_write_text(out.with_suffix(".svg"), line_chart(curves, "forecast", xlabel="week",
                                                             ylabel="weekly cases"))


def cmd_report(args, config: Config) -> None:
    fit_report = _read_json(_input_path(args.fit, "fit report"))
    stab = _read_json(_input_path(args.stability, "stability report")) if args.stability else None
    forecasts = [str(_input_path(p, "forecast CSV")) for p in (args.forecast or [])]
    write_json(_out_path(args, config, "report.json"), assemble_report(fit_report, stab, forecasts))


def cmd_synth(args, config: Config) -> None:
    sp = SynthParams.from_mapping(read_key_values(_input_path(args.params, "parameter file")))
    series = synthesize(sp, args.weeks, args.seed, args.noise)
    write_series(_out_path(args, config, "synthetic.csv"), series)


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value config file (flags override it)")
    common.add_argument("--out", help="output path (default: <output_dir>/<stage name>)")

    parser = _Parser(prog="seasonir", description="Seasonal IR model fitting and Floquet stability analysis.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", parents=[common], help="aggregate a daily CSV to weekly counts")
    p.add_argument("--input")
    p.add_argument("--cadence", choices=[c.value for c in Cadence], default=Cadence.DAILY.value,
                   help="cadence assumed when the file has no metadata line")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("filter", parents=[common], help="centered moving average")
    p.add_argument("--input")
    p.add_argument("--window", type=int)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("spectrum", parents=[common], help="DFT magnitudes and dominant peaks")
    p.add_argument("--input")
    p.add_argument("--peaks", type=int, default=3)
    p.add_argument("--min-separation", type=float)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("fit", parents=[common], help="multi-start collocation fit of one scheme")
    p.add_argument("--train-csv")
    p.add_argument("--params-file", help="fixed rates N, mu, gamma, kappa")
    p.add_argument("--scheme", choices=["1", "2", "3", "4", "mf", "MF"])
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--omega-star", help="comma-separated target frequencies")
    p.add_argument("--pool", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--positivity", action="store_true", help="constrain R(0) >= 0")
    p.add_argument("--n-train", type=int)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_fit)

    for name, func, helptext in (("stability", cmd_stability, "R0, R_max and classification"),
                                 ("forecast", cmd_forecast, "integrate the fitted model past the data")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--fit", help="fit report JSON")
        src.add_argument("--params-file", help="explicit model parameters")
        p.add_argument("--h", type=float, help="integration step in weeks")
        if name == "stability":
            p.add_argument("--omega-decimals", type=int)
            p.add_argument("--phi-csv")
        else:
            p.add_argument("--horizon", type=float)
            p.add_argument("--data", help="weekly CSV to place beside the model curve")
            p.add_argument("--svg", action="store_true")
            p.add_argument("--start-date", type=date.fromisoformat,
                           help="calendar date of week 0 (adds a date label column)")
        p.set_defaults(func=func)

    p = sub.add_parser("report", parents=[common], help="combine stage outputs into one JSON")
    p.add_argument("--fit", required=True)
    p.add_argument("--stability")
    p.add_argument("--forecast", action="append")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", parents=[common], help="weekly series from a known IR system")
    p.add_argument("--params", required=True)
    p.add_argument("--weeks", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", choices=["none", "poisson"], default="none")
    p.set_defaults(func=cmd_synth)
    return parser


_NUMERIC = (AllStartsFailed, IntegrationError, NoConvergenceToOrbit, MultiplierMismatch, NoPeaksFound,
            NotConverged, FloatingPointError, np.linalg.LinAlgError)


def _fail(code: str, message: str, status: int) -> int:
    print(f"seasonir: error[{code}]: {message}", file=sys.stderr)
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        config = _load_config(args)
        args.func(args, config)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except FileNotFoundError as exc:
        return _fail("missing-file", str(exc), EXIT_USAGE)
    except _NUMERIC as exc:
        return _fail("numerical", str(exc), EXIT_NUMERIC)
    except (ConfigError, ReportError) as exc:
        return _fail("config", str(exc), EXIT_USAGE)
    except (ValueError, OSError) as exc:
        return _fail("input", str(exc), EXIT_USAGE)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
