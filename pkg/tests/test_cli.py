import json
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seasonir.cli import EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from seasonir.config import Config, ConfigError, SynthParams, parse_key_values, parse_list, parse_scheme
from seasonir.assimilate.transcription import SchemeId
from seasonir.integrate import StepperConfig
from seasonir.model import FixedRates
from seasonir.pipeline import FittedSystem, NotConverged, forecast, synthesize
from seasonir.timeseries import read_series

from conftest import MF_RAW

SYNTH = """# known system
N = 1e7
mu = 1/3120
nu = 1e-3
alpha = 0.000263
deltas = 0.0000789
omegas = 1/52
I0 = 300
R0 = 2000
"""


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "p.cfg").write_text(SYNTH)
    return tmp_path


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    d = tmp_path_factory.mktemp("pipe")
    (d / "p.cfg").write_text(SYNTH)
    assert run("synth", "--params", d / "p.cfg", "--weeks", 60, "--out", d / "s.csv") == EXIT_OK
    fit_args = ("fit", "--train-csv", d / "s.csv", "--scheme", "2", "--omega-star", "1/52", "--pool", 2,
                "--seed", 1)
    assert run(*fit_args, "--out", d / "fit.json") == EXIT_OK
    assert run(*fit_args, "--out", d / "fit2.json") == EXIT_OK
    return d


def test_synth_writes_505_weekly_points(workdir):
    out = workdir / "s.csv"
    assert run("synth", "--params", workdir / "p.cfg", "--weeks", 505, "--seed", 7, "--out", out) == EXIT_OK
    series = read_series(out)
    assert len(series) == 505 and np.all(series.counts > 0)
    assert series.counts[0] == 300.0


def test_synth_noise_is_seeded(workdir):
    for name, seed in (("a", 3), ("b", 3), ("c", 4)):
        run("synth", "--params", workdir / "p.cfg", "--weeks", 30, "--seed", seed, "--noise", "poisson",
            "--out", workdir / f"{name}.csv")
    a, b, c = ((workdir / f"{n}.csv").read_bytes() for n in "abc")
    assert a == b and a != c


def test_fit_scheme_2_converges(pipeline):
    report = json.loads((pipeline / "fit.json").read_text())
    assert report["status"] == "Converged" and report["scheme"] == "S2"
    assert report["parameters"]["alpha"] == pytest.approx(2.63e-4, rel=1e-2)
    prov = report["provenance"]
    assert prov["seed"] == 1 and len(prov["config_hash"]) == 64 and len(prov["data_hash"]) == 64


def test_fit_reports_are_byte_identical(pipeline):
    assert (pipeline / "fit.json").read_bytes() == (pipeline / "fit2.json").read_bytes()


def test_downstream_stages_compose(pipeline):
    d = pipeline
    assert run("filter", "--input", d / "s.csv", "--window", 3, "--out", d / "f.csv") == EXIT_OK
    assert len(read_series(d / "f.csv")) == 60
    assert run("spectrum", "--input", d / "s.csv", "--peaks", 1, "--out", d / "sp.csv", "--svg") == EXIT_OK
    assert (d / "sp.svg").read_text().startswith("<svg")
    assert run("stability", "--fit", d / "fit.json", "--out", d / "st.json", "--phi-csv", d / "phi.csv") == EXIT_OK
    stab = json.loads((d / "st.json").read_text())
    assert stab["sigma"] == pytest.approx(52.0, rel=1e-3) and stab["r_max"] < stab["r0"]
    assert run("forecast", "--fit", d / "fit.json", "--horizon", 10, "--data", d / "s.csv",
               "--out", d / "fc.csv", "--start-date", "2020-01-05") == EXIT_OK
    lines = (d / "fc.csv").read_text().splitlines()
    assert lines[0] == "t,I,R,segment,data,date" and len(lines) == 1 + 70
    assert lines[60].split(",")[3] == "train" and lines[61].split(",")[3] == "test"
    assert lines[61].split(",")[4] == "" and lines[1].split(",")[-1] == "2020-01-05"
    assert run("report", "--fit", d / "fit.json", "--stability", d / "st.json", "--forecast", d / "fc.csv",
               "--out", d / "rep.json") == EXIT_OK
    rep = json.loads((d / "rep.json").read_text())
    assert rep["stability"] == stab and rep["forecast_files"] == [str(d / "fc.csv")]
    assert rep["fits"][0]["status"] == "Converged"


def test_report_rejects_wrong_stage(pipeline, tmp_path):
    out = tmp_path / "rep.json"
    assert run("report", "--fit", pipeline / "s.csv", "--out", out) == EXIT_USAGE
    assert not out.exists()


def test_missing_input_exits_1_without_outputs(tmp_path, capsys):
    out = tmp_path / "fit.json"
    assert run("fit", "--train-csv", tmp_path / "absent.csv", "--out", out) == EXIT_USAGE
    assert "error[missing-file]" in capsys.readouterr().err
    assert list(tmp_path.iterdir()) == []


def test_usage_errors(workdir, capsys):
    assert run("fit", "--scheme", "7") == EXIT_USAGE
    assert run("synth", "--weeks", 5) == EXIT_USAGE
    assert run("nonsense") == EXIT_USAGE
    assert "error[usage]" in capsys.readouterr().err
    bad = workdir / "bad.cfg"
    bad.write_text("pool = 0\n")
    assert run("fit", "--config", bad, "--train-csv", workdir / "p.cfg") == EXIT_USAGE
    assert "error[config]" in capsys.readouterr().err


def test_numerical_failure_exits_2(workdir, capsys):
    flat = workdir / "flat.csv"
    flat.write_text("week,cases\n" + "".join(f"{i},5\n" for i in range(20)))
    assert run("spectrum", "--input", flat, "--out", workdir / "sp.csv") == EXIT_NUMERIC
    assert "error[numerical]" in capsys.readouterr().err
    assert not (workdir / "sp.csv").exists()


def test_console_script_entry_point(workdir):
    proc = subprocess.run([sys.executable, "-m", "seasonir.cli", "synth", "--params", str(workdir / "p.cfg"),
                           "--weeks", "4", "--out", str(workdir / "s.csv")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert len(read_series(workdir / "s.csv")) == 4


def test_config_parsing_and_overrides():
    kv = parse_key_values("# comment\nScheme = mf\nlambda = 1e-4  # trailing\npool=5\nomega_star = 1/52, 1/26\n")
    cfg = Config.from_mapping(kv)
    assert cfg.scheme is SchemeId.MF and cfg.lam == 1e-4 and cfg.pool == 5
    assert cfg.omega_star == pytest.approx((1 / 52, 1 / 26))
    assert cfg.override(pool=9, seed=None).pool == 9
    assert Config().fixed == FixedRates() and Config().resolved_lambda >= 0
    with pytest.raises(ConfigError):
        Config.from_mapping({"poool": "5"})
    with pytest.raises(ConfigError):
        parse_key_values("no equals sign here")
    with pytest.raises(ConfigError):
        parse_scheme("9")


def test_config_hash_ignores_jobs_only():
    base = Config()
    assert base.override(jobs=4).digest() == base.digest()
    assert base.override(seed=1).digest() != base.digest()


@given(st.lists(st.fractions(min_value=-10, max_value=10, max_denominator=1000), min_size=1, max_size=5))
def test_exact_list_round_trip(values):
    text = ", ".join(str(v) for v in values)
    assert parse_list(text, exact=True) == tuple(values)


def test_forecast_horizon_zero_covers_training_window():
    sp = SynthParams.from_mapping(parse_key_values(SYNTH))
    fit = FittedSystem.from_synth(sp, n_train=60)
    fc = forecast(fit, 0)
    assert len(fc.trajectory.times) == 60 and not fc.test_mask.any()
    data = synthesize(sp, 60)
    assert np.allclose(fc.trajectory.states[:, 0], data.counts, rtol=1e-6)
    with pytest.raises(NotConverged):
        forecast(FittedSystem(**{**fit.__dict__, "status": "MaxIter"}), 0)


def test_dies_out_fit_decays_over_100_periods():
    sp = SynthParams(FixedRates(), nu=1e-3, alpha=2.2e-4, deltas=(5e-5,), omegas=(Fraction(1, 52),), I0=300.0,
                     R0=0.0)
    fit = FittedSystem.from_synth(sp, n_train=52)
    assert fit.alpha / ((0.25 + 1 / 3120) * fit.nu) < 1
    fc = forecast(fit, 100 * 52, StepperConfig(0.25))
    assert fc.trajectory.final[0] < 1e-3 * sp.I0


def test_mf_raw_forecast_is_bounded_and_cyclic():
    omegas = tuple(Fraction(w) for w in MF_RAW["omegas"])
    fit = FittedSystem(FixedRates(), MF_RAW["nu"], MF_RAW["alpha"], MF_RAW["deltas"], omegas, MF_RAW["I0"],
                       MF_RAW["R0"], "Converged", 473)
    sigma = float(fit.forcing().sigma)
    fc = forecast(fit, 10 * sigma, StepperConfig(0.25))
    I = fc.trajectory.states[:, 0]
    assert np.all(np.isfinite(I)) and I.min() > 0 and I.max() < fit.fixed.N
    per = int(round(sigma))
    last, prev = I[-per:], I[-2 * per:-per]
    assert last.max() == pytest.approx(prev.max(), rel=1e-2)
    assert last.min() == pytest.approx(prev.min(), rel=1e-2)
    assert last.max() > 1.5 * last.min()  # cycles rather than settling to a constant
