import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seasonir.assimilate.transcription import (OMEGA_STAR, DecisionVector, SchemeError, SchemeId, SchemeSpec,
                                               initial_guess, objective_eval, transcribe)
from seasonir.model import FixedRates, SeasonalForcing, forcing_eval
from seasonir.timeseries import Cadence, IncidenceSeries

FIXED = FixedRates()


def weekly(values):
    values = np.asarray(values, dtype=float)
    return IncidenceSeries(Cadence.WEEKLY, np.arange(values.size), values)


def bumpy(n, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    return 400 + 150 * np.cos(2 * np.pi * t / 52) + rng.uniform(0, 30, n)


def decision_with_nodes(problem, alpha, deltas, omegas, nu, nodes):
    nodes = np.asarray(nodes, dtype=float)
    stages = np.repeat(nodes[:-1, None, :], 2, axis=1)
    return DecisionVector(alpha, tuple(deltas), tuple(omegas), nu, nodes[0, 0], nodes[0, 1], nodes, stages,
                          tuple(abs(d) for d in deltas) if problem.scheme.uses_slacks else ())


def test_s1_counts():
    prob = transcribe(SchemeSpec.named(SchemeId.S1), weekly(bumpy(10)), FIXED)
    assert prob.n_eq == 9 * (2 * 2 + 2) == 54
    assert prob.c(prob.to_z(prob.pack(initial_guess(prob, 3e-4, [1e-5], [OMEGA_STAR], 1e-3, 400, 0)))).size == 54
    # |delta| <= alpha as two rows, omega > 0, nu floor, then I_k >= 0 on all 10 nodes
    assert prob.n_param_ineq == 4 and prob.n_ineq == 14
    G = prob.g_jac(np.zeros(prob.n)).toarray()[:2, 1]
    assert sorted(G.tolist()) == [-1.0, 1.0]


def test_s2_frequency_box():
    spec = SchemeSpec.named(SchemeId.S2)
    assert spec.epsilon == 1e-2 and spec.omega_star == (0.017822,) and spec.lam == 0
    assert spec.omega_bounds() == [(pytest.approx(0.007822), pytest.approx(0.027822))]
    prob = transcribe(spec, weekly(bumpy(10)), FIXED)
    assert prob.n_param_ineq == 5
    dv = initial_guess(prob, 3e-4, [1e-5], [0.03], 1e-3, 400, 0)
    res = prob.physical_inequalities(prob.pack(dv))
    assert res.min() == pytest.approx(0.027822 - 0.03)


def test_mf_slack_rows():
    spec = SchemeSpec.named(SchemeId.MF, omega_star=(0.00609, 0.01882, 0.02476))
    prob = transcribe(spec, weekly(bumpy(12)), FIXED)
    # 2m slack rows + alpha >= sum s_j + 2m omega box rows + nu floor
    assert prob.n_param_ineq == 2 * 3 + 1 + 2 * 3 + 1
    assert prob.n_p == 1 + 3 + 3 + 1 + 2 + 3


def test_scheme_invariants():
    with pytest.raises(SchemeError):
        SchemeSpec(SchemeId.S1, lam=1.0)
    with pytest.raises(SchemeError):
        SchemeSpec(SchemeId.S2, epsilon=0.0)
    with pytest.raises(SchemeError):
        SchemeSpec(SchemeId.MF, epsilon=0.01, omega_star=())
    with pytest.raises(SchemeError):
        SchemeSpec(SchemeId.S3, lam=1.0, omega_star=(0.01, 0.02))
    assert SchemeSpec.named(SchemeId.S3).lam == 1e4 and SchemeSpec.named(SchemeId.S4).lam == 10


def test_transcribe_rejects_short_or_daily():
    with pytest.raises(ValueError):
        transcribe(SchemeSpec.named(SchemeId.S1), weekly(np.ones(7)), FIXED)
    with pytest.raises(ValueError):
        transcribe(SchemeSpec.named(SchemeId.S1),
                   IncidenceSeries(Cadence.DAILY, np.arange(20), np.ones(20)), FIXED)


def test_objective_examples():
    data = bumpy(9)
    prob = transcribe(SchemeSpec.named(SchemeId.S1), weekly(data), FIXED)
    nodes = np.column_stack([data, np.zeros(9)])
    assert objective_eval(prob, decision_with_nodes(prob, 1e-4, [0.0], [0.02], 1e-3, nodes)) == 0.0

    zeros = transcribe(SchemeSpec.named(SchemeId.S1), weekly(np.zeros(9)), FIXED)
    c = 3.5
    const = np.column_stack([np.full(9, c), np.zeros(9)])
    assert objective_eval(zeros, decision_with_nodes(zeros, 1e-4, [0.0], [0.02], 1e-3, const)) == \
        pytest.approx(0.5 * c * c * 8)

    pen = transcribe(SchemeSpec(SchemeId.S3, lam=2.0), weekly(data), FIXED)
    assert objective_eval(pen, decision_with_nodes(pen, 3.0, [4.0], [0.0], 0.0, nodes)) == pytest.approx(25.0)


def test_lambda_zero_has_no_penalty():
    data = bumpy(9)
    prob = transcribe(SchemeSpec.named(SchemeId.S1), weekly(data), FIXED)
    nodes = np.column_stack([data + 1.0, np.zeros(9)])
    small = decision_with_nodes(prob, 1e-4, [0.0], [0.02], 1e-3, nodes)
    large = decision_with_nodes(prob, 1e3, [5e2], [0.4], 7.0, nodes)
    assert objective_eval(prob, small) == objective_eval(prob, large)


schemes = st.sampled_from([SchemeSpec.named(SchemeId.S1), SchemeSpec.named(SchemeId.S2),
                           SchemeSpec.named(SchemeId.S3, lam=3.0), SchemeSpec.named(SchemeId.S4),
                           SchemeSpec.named(SchemeId.MF, omega_star=(0.006, 0.019))])


def random_point(prob, rng):
    m = prob.m
    alpha = 10 ** rng.uniform(-4.5, -2.5)
    deltas = rng.uniform(-1, 1, m) * alpha / m
    omegas = [rng.uniform(lo, min(hi, lo + 0.05)) for lo, hi in prob.scheme.omega_bounds()]
    nu = 10 ** rng.uniform(-4, -2)
    dv = initial_guess(prob, alpha, deltas, omegas, nu, rng.uniform(50, 500), rng.uniform(0, 1e4))
    v = prob.pack(dv)
    v[prob.n_p:] *= 1 + 0.01 * rng.standard_normal(prob.n_y)  # off the defect manifold
    return v


@given(schemes, st.integers(0, 2**32 - 1))
def test_gradient_matches_central_differences(spec, seed):
    rng = np.random.default_rng(seed)
    prob = transcribe(spec, weekly(bumpy(10, seed % 7)), FIXED)
    v = random_point(prob, rng)
    grad = prob.physical_gradient(v)
    for k in rng.choice(prob.n, size=8, replace=False):
        # the objective is quadratic in v, so a large step keeps the difference exact; what remains
        # is cancellation in f(v + e) - f(v - e), a few ulps of |f| divided by the step
        step = 1e-2 * (1.0 + abs(v[k]))
        e = np.zeros(prob.n)
        e[k] = step
        hi, lo = prob.physical_objective(v + e), prob.physical_objective(v - e)
        fd = (hi - lo) / (2 * step)
        roundoff = 8 * np.finfo(float).eps * max(abs(hi), abs(lo), prob.f_ref) / step
        assert fd == pytest.approx(grad[k], rel=1e-5, abs=roundoff)


@given(schemes, st.integers(0, 2**32 - 1))
def test_solver_coordinate_derivatives(spec, seed):
    rng = np.random.default_rng(seed)
    prob = transcribe(spec, weekly(bumpy(9, seed % 5)), FIXED)
    z = prob.to_z(random_point(prob, rng))
    assert prob.to_z(prob.to_v(z)) == pytest.approx(z, rel=1e-12, abs=1e-12)
    g, J = prob.grad(z), prob.c_jac(z)
    J = J.toarray() if hasattr(J, "toarray") else np.asarray(J)
    for k in rng.choice(prob.n, size=6, replace=False):
        e = np.zeros(prob.n)
        e[k] = 1e-6
        hi, lo = prob.f(z + e), prob.f(z - e)
        fd_f = (hi - lo) / 2e-6
        fd_c = (prob.c(z + e) - prob.c(z - e)) / 2e-6
        roundoff = 8 * np.finfo(float).eps * max(abs(hi), abs(lo)) / 1e-6
        assert fd_f == pytest.approx(g[k], rel=1e-5, abs=1e-7 + roundoff)
        assert np.abs(fd_c - J[:, k]).max() <= 1e-5 * (1 + np.abs(J[:, k]).max())


@given(schemes, st.integers(0, 2**32 - 1))
def test_feasible_points_keep_beta_nonnegative(spec, seed):
    rng = np.random.default_rng(seed)
    prob = transcribe(spec, weekly(bumpy(9)), FIXED)
    v = random_point(prob, rng)
    if prob.physical_inequalities(v).min() < 0:
        return
    dv = prob.unpack(v)
    beta = forcing_eval(SeasonalForcing(dv.alpha, dv.deltas, dv.omegas), np.linspace(0, 2000, 20001))
    assert beta.min() >= -1e-12 * dv.alpha


def test_defects_vanish_on_simulated_states():
    prob = transcribe(SchemeSpec.named(SchemeId.S2), weekly(bumpy(20)), FIXED)
    dv = initial_guess(prob, 2.7e-4, [5e-5], [0.019], 1e-3, 300.0, 2000.0)
    assert np.abs(prob.defects(prob.pack(dv))).max() <= 1e-8 * prob.state_scale.max()
