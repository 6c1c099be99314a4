"""Fit a scheme to noise-free (or Poisson) synthetic data and compare with the generating parameters."""

import argparse
import time
from fractions import Fraction

from seasonir.assimilate.fitting import multi_start
from seasonir.assimilate.transcription import SchemeSpec, transcribe
from seasonir.config import SynthParams, parse_scheme
from seasonir.model import FixedRates
from seasonir.pipeline import synthesize


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--weeks", type=int, default=505)
    ap.add_argument("--scheme", default="2")
    ap.add_argument("--pool", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noise", choices=["none", "poisson"], default="none")
    args = ap.parse_args()
    truth = SynthParams(FixedRates(), nu=1e-3, alpha=2.63e-4, deltas=(7.89e-5,), omegas=(Fraction(1, 52),),
                        I0=300.0, R0=2000.0)
    series = synthesize(truth, args.weeks, args.seed, args.noise)
    spec = SchemeSpec.named(parse_scheme(args.scheme), omega_star=(1 / 52,))
    t0 = time.perf_counter()
    fit = multi_start(transcribe(spec, series, FixedRates()), args.pool, args.seed)
    p = fit.to_report()["parameters"]
    print(f"{fit.status.value} after {time.perf_counter() - t0:.1f} s, start {fit.start_index}, SSE {fit.sse:.3e}")
    for key, true in (("alpha", truth.alpha), ("nu", truth.nu), ("I0", truth.I0), ("R0", truth.R0)):
        print(f"  {key:6s} fit {p[key]:.8g}  true {true:.8g}  rel {abs(p[key] / true - 1):.2e}")
    for j, (d, w) in enumerate(zip(p["deltas"], p["omegas"])):
        print(f"  delta{j} fit {d:.8g} true {truth.deltas[j]:.8g}; omega{j} fit {w:.8g} "
              f"true {float(truth.omegas[j]):.8g}")


if __name__ == "__main__":
    main()
