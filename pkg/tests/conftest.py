from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings

from seasonir.model import FixedRates, IrParams, SeasonalForcing

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

# reported raw-data multi-frequency fit
MF_RAW = dict(alpha=1.57434e-4, deltas=(-8.50356e-6, 3.18808e-5, -2.09876e-5),
               omegas=("0.00609", "0.01882", "0.02476"), nu=6.23095e-4, I0=1.14701e2, R0=5.16297e-21)
MF_FILTERED = dict(alpha=2.73535e-4, deltas=(-1.41929e-5, 4.84729e-5, -2.90086e-5),
                    omegas=("0.00609", "0.01882", "0.02476"), nu=0.00109, I0=1.12664e2, R0=3.61013e-20)


@pytest.fixture
def fixed():
    return FixedRates()


def mf_system(values=MF_RAW):
    params = IrParams.from_fixed(FixedRates(), values["nu"])
    forcing = SeasonalForcing.build(values["alpha"], values["deltas"], [Fraction(w) for w in values["omegas"]])
    return params, forcing


@pytest.fixture
def mf_raw():
    return mf_system(MF_RAW)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
