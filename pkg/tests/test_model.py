import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seasonir.model import (FixedRates, HumanState, IrParams, SeasonalForcing, SiruvParams, as_fraction,
                            autonomous_jacobian, basic_reproduction_number, common_period, equilibria,
                            forcing_eval, ir_jacobian, ir_rhs, qssa_vector, siruv_rhs)

GAMMA, MU = 0.25, 1 / 3120
DEFAULT_RATES = IrParams(N=1e7, mu=MU, gamma=GAMMA, kappa=1 / 36, nu=0.5)

positive = st.floats(1e-6, 1e3)
frequency = st.fractions(Fraction(1, 200), Fraction(1, 2), max_denominator=200)


def forcing_strategy(max_m=3):
    return st.integers(0, max_m).flatmap(lambda m: st.builds(
        lambda a, d, w: SeasonalForcing.build(a, d, w), positive,
        st.lists(st.floats(-1e3, 1e3), min_size=m, max_size=m),
        st.lists(frequency, min_size=m, max_size=m)))


def test_r0_reported_raw_value():
    # reported raw fit: alpha 1.57434e-4, nu 6.23095e-4 -> 1.00937
    assert basic_reproduction_number(1.57434e-4, GAMMA, MU, 6.23095e-4) == pytest.approx(1.00937, abs=1e-4)


def test_r0_trivial_cases():
    assert basic_reproduction_number(0.0, GAMMA, MU, 0.3) == 0.0
    nu = 0.37
    assert basic_reproduction_number((GAMMA + MU) * nu, GAMMA, MU, nu) == 1.0


def test_forcing_examples():
    f = SeasonalForcing.build(0.3, [0.0, 0.0], [Fraction(1, 52), Fraction(1, 26)])
    assert np.allclose(forcing_eval(f, np.linspace(0, 200, 77)), 0.3)
    g = SeasonalForcing.build(1.0, [0.1, -0.2, 0.05], ["0.01", "0.02", "0.03"])
    assert forcing_eval(g, 0.0) == pytest.approx(0.95)
    mf = SeasonalForcing.build(1.57434e-4, [-8.50356e-6, 3.18808e-5, -2.09876e-5], ["0.00609", "0.01882", "0.02476"])
    # direct summation: 1.57434e-4 - 8.50356e-6 + 3.18808e-5 - 2.09876e-5
    assert forcing_eval(mf, 0.0) == pytest.approx(1.5982364e-4, rel=1e-7)
    assert mf.sigma == 100000


def test_exact_fraction_reading():
    assert as_fraction(0.017822) == Fraction(17822, 1000000)
    assert as_fraction("0.00609") == Fraction(609, 100000)
    assert as_fraction(0.0178223, decimals=5) == Fraction(1782, 100000)
    assert common_period([Fraction(1, 52), Fraction(1, 26)]) == 52
    assert common_period([Fraction(2, 3)]) == Fraction(3, 2)


@given(forcing_strategy(), st.floats(-500, 500))
def test_forcing_is_sigma_periodic(f, t):
    sigma = float(f.sigma)
    amp = np.abs(f.delta_values).sum()
    # phase roundoff grows with the argument 2 pi omega t
    tol = 1e-12 * (abs(f.alpha) + amp) + 16 * np.finfo(float).eps * amp * math.tau * max(
        f.omega_values, default=0) * (abs(t) + sigma)
    assert abs(forcing_eval(f, t + sigma) - forcing_eval(f, t)) <= tol


@given(forcing_strategy(max_m=2))
def test_forcing_mean_over_period_is_alpha(f):
    sigma = float(f.sigma)
    if sigma > 5000:
        return
    n = 4096 * max(1, math.ceil(sigma * max(f.omega_values, default=0)))
    t = np.arange(n) * sigma / n  # rectangle rule is exact for trigonometric polynomials of low degree
    assert np.mean(forcing_eval(f, t)) == pytest.approx(f.alpha, rel=1e-9, abs=1e-9 * (1 + np.abs(f.delta_values).sum()))


@given(forcing_strategy(), st.floats(0, 1e3))
def test_nonnegative_when_alpha_dominates(f, t):
    total = np.abs(f.delta_values).sum()
    g = SeasonalForcing.build(total + f.alpha, f.delta_values, f.omegas)
    assert forcing_eval(g, t) >= -1e-12 * (total + f.alpha)


def test_ir_rhs_examples():
    f = SeasonalForcing.constant(0.2)
    assert np.array_equal(ir_rhs(DEFAULT_RATES, f, 0.0, (0.0, 0.0)), [0.0, 0.0])
    dI, _ = ir_rhs(DEFAULT_RATES, f, 0.0, (DEFAULT_RATES.N, 0.0))
    assert dI == pytest.approx(-(GAMMA + MU) * DEFAULT_RATES.N)
    assert dI < 0


def test_endemic_equilibrium_is_root():
    eq = equilibria(DEFAULT_RATES, 0.2)
    assert eq.dfe == HumanState(0.0, 0.0)
    assert basic_reproduction_number(0.2, GAMMA, MU, 0.5) == pytest.approx(1.597, abs=1e-3)
    assert eq.ee.I > 0 and eq.ee.R > 0
    rhs = ir_rhs(DEFAULT_RATES, SeasonalForcing.constant(0.2), 0.0, eq.ee)
    assert np.all(np.abs(rhs) <= 1e-9 * np.abs(eq.ee))
    eq.ee.check(DEFAULT_RATES)


@given(st.floats(1e-4, 10), st.floats(1e-4, 10))
def test_ee_present_iff_r0_above_one(alpha, nu):
    p = IrParams(nu=nu)
    eq = equilibria(p, alpha)
    r0 = basic_reproduction_number(alpha, p.gamma, p.mu, nu)
    assert (eq.ee is not None) == (r0 > 1)
    if eq.ee is not None and r0 > 1 + 1e-6:
        rhs = ir_rhs(p, SeasonalForcing.constant(alpha), 0.0, eq.ee)
        scale = (p.gamma + p.mu) * max(eq.ee.I, 1.0)
        assert np.all(np.abs(rhs) <= 1e-8 * scale)


def test_jacobian_at_dfe_and_coupling():
    f = SeasonalForcing.build(0.2, [0.05], [Fraction(1, 52)])
    for t in (0.0, 7.3, 30.0):
        J = ir_jacobian(DEFAULT_RATES, f, t, (0.0, 0.0))
        beta = forcing_eval(f, t)
        assert J == pytest.approx(np.array([[beta / 0.5 - GAMMA - MU, 0.0], [GAMMA, -MU - 1 / 36]]))
    eig = np.sort(np.linalg.eigvals(autonomous_jacobian(DEFAULT_RATES, 0.2, (0.0, 0.0))).real)
    assert eig == pytest.approx(np.sort([0.2 / 0.5 - GAMMA - MU, -MU - 1 / 36]))


@given(forcing_strategy(max_m=2), st.floats(0.01, 0.99), st.floats(0.0, 1.0), st.floats(0, 100),
       st.floats(1e-3, 10))
def test_jacobian_matches_central_differences(f, frac_i, frac_r, t, nu):
    p = IrParams(nu=nu)
    I = frac_i * p.N
    R = frac_r * (p.N - I)
    J = ir_jacobian(p, f, t, (I, R))
    step = 1e-6 * p.N  # states live on the scale of N; a smaller step drowns in roundoff
    x = np.array([I, R])
    fd = np.column_stack([(ir_rhs(p, f, t, x + e) - ir_rhs(p, f, t, x - e)) / (2 * step)
                          for e in np.eye(2) * step])
    scale = np.abs(J).max() + 1e-12
    assert np.abs(J - fd).max() <= 1e-6 * scale
    assert J[1, 0] == p.gamma


@given(forcing_strategy(), st.floats(0, 1e7), st.floats(0, 1e3))
def test_vector_field_points_inward(f, other, t):
    if f.alpha < np.abs(f.delta_values).sum():
        return
    p = IrParams(nu=0.01)
    assert ir_rhs(p, f, t, (0.0, other))[0] >= 0
    assert ir_rhs(p, f, t, (other, 0.0))[1] >= 0


SIRUV = SiruvParams(N=1e4, mu=1 / 3120, gamma=0.25, kappa=1 / 36, Lambda=5e3, rho=2.0, theta=0.5)


def test_siruv_examples():
    f = SeasonalForcing.build(0.3, [0.1], [Fraction(1, 52)])
    x = (SIRUV.N, 0.0, 0.0, SIRUV.Lambda / SIRUV.theta, 0.0)
    assert np.allclose(siruv_rhs(SIRUV, f, 3.0, x), 0.0)
    R = 12.0
    d = siruv_rhs(SIRUV, f, 1.0, (9000.0, 0.0, R, 100.0, 0.0))
    assert d[0] == pytest.approx(SIRUV.mu * (SIRUV.N - 9000.0) + SIRUV.kappa * R)


@given(st.floats(0, 1e4), st.floats(0, 1), st.floats(1, 1e4), st.floats(0, 1e4), st.floats(0, 100))
def test_siruv_conserves_humans(I, r_frac, U, V, t):
    R = r_frac * (SIRUV.N - I)
    S = SIRUV.N - I - R
    d = siruv_rhs(SIRUV, SeasonalForcing.constant(0.3), t, (S, I, R, U, V))
    # with S = N - I - R the human total is stationary
    assert abs(d[:3].sum()) <= 1e-12 * (SIRUV.N + abs(d[:3]).max())


def test_qssa_examples():
    assert qssa_vector(SIRUV, 0.0) == pytest.approx((SIRUV.Lambda / SIRUV.theta, 0.0))
    U, V = qssa_vector(SIRUV, 1e12)
    assert U == pytest.approx(SIRUV.Lambda * SIRUV.N / (SIRUV.rho * 1e12), rel=1e-6)
    assert V == pytest.approx(SIRUV.Lambda / SIRUV.theta, rel=1e-6)
    with pytest.raises(ValueError):
        qssa_vector(SIRUV, -1.0)


@given(st.floats(0, 1e9))
def test_qssa_infective_fraction_identity(I):
    U, V = qssa_vector(SIRUV, I)
    nu = SIRUV.nu
    assert V / (U + V) == pytest.approx(I / (I + nu * SIRUV.N), rel=1e-12, abs=1e-300)
    assert SIRUV.reduced().nu == nu


def test_parameter_validation():
    with pytest.raises(ValueError):
        IrParams(nu=0.0)
    with pytest.raises(ValueError):
        FixedRates(gamma=-1.0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        SiruvParams(theta=1e-5)
    assert caught
    with pytest.raises(ValueError):
        HumanState(-1e3, 0.0).check(DEFAULT_RATES)
