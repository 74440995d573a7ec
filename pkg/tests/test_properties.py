"""Property tests over randomly drawn models, initial values and brackets."""

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from radial_shooter import classify as cl
from radial_shooter import functionals as fn
from radial_shooter.experiments import build_fmu
from radial_shooter.nonlinearity import PowerDifference, PurePower, ShiftedPower, make_nonlinearity
from radial_shooter.shooting import InitialCondition, ProblemParams, integrate

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
NL = make_nonlinearity(PowerDifference(3.0))
PARAMS = cl.classification_params()

exponents = st.floats(1.2, 9.0)
models = st.one_of(
    exponents.map(PowerDifference),
    exponents.map(PurePower),
    st.builds(ShiftedPower, exponents, st.floats(0.0, 2.0)),
)


@SETTINGS
@given(models, st.floats(-20.0, 20.0))
def test_f_is_odd(model, s):
    # a shifted power is nonzero at the origin, so its odd extension jumps there
    assume(s != 0.0)
    nl = make_nonlinearity(model)
    assert nl.f(-s) == -nl.f(s)
    assert nl.F(-s) == nl.F(s)


@SETTINGS
@given(models, st.floats(0.05, 10.0))
def test_F_is_an_antiderivative(model, s):
    nl = make_nonlinearity(model)
    h = 1e-5 * max(1.0, s)
    fd = (nl.F(s + h) - nl.F(s - h)) / (2 * h)
    assert fd == pytest.approx(nl.f(s), rel=1e-6, abs=1e-8)
    dfd = (nl.f(s + h) - nl.f(s - h)) / (2 * h)
    assert dfd == pytest.approx(nl.df(s), rel=1e-6, abs=1e-8)


@SETTINGS
@given(st.floats(1.5, 4.0), st.floats(0.01, 0.2), st.floats(1.0, 100.0), st.floats(0.5, 10.0))
def test_piecewise_f_is_continuous_at_kinks(alpha1, eps, lam, mu):
    nl = build_fmu(PowerDifference(3.0), PurePower(3.0), alpha1, eps, lam, mu)
    for k in nl.model.kinks:
        h = 1e-13 * k
        below, above = nl.f(k - h), nl.f(k + h)
        # allow for the one-sided slopes across the probe gap
        slope = max(abs(nl.df(k - h)), abs(nl.df(k + h)))
        assert abs(above - below) <= 4 * h * slope + 1e-12 * abs(below)


@SETTINGS
@given(st.floats(0.5, 30.0))
def test_energy_is_non_increasing(alpha):
    traj = integrate(NL, ProblemParams(r_max=30.0), InitialCondition(0.0, alpha))
    _, u, du = traj.nodes()
    energy = 0.5 * du ** 2 + np.array([NL.F(float(x)) for x in u])
    assert np.all(np.diff(energy) <= 1e-9 * max(1.0, abs(energy[0])))


@SETTINGS
@given(st.floats(1.42, 30.0))
def test_trap_is_sound(alpha):
    c = cl.classify_alpha(NL, PARAMS, alpha, max_zeros=cl.K_CAP)
    if c.trap is None:
        return
    full = integrate(NL, ProblemParams(r_max=200.0), InitialCondition(0.0, alpha), stop_on_trap=False)
    later = [e for e in full.events_of("ZeroOfU") if e.r > c.trap[0] * (1 + 1e-9)]
    assert not later


@SETTINGS
@given(st.floats(1.42, 60.0), st.integers(1, 4))
def test_nested_sets(alpha, k):
    c = cl.classify_alpha(NL, PARAMS, alpha, keep_trajectory=False)
    if c.in_N(k + 1):
        assert c.in_N(k)
    capped = cl.classify_alpha(NL, PARAMS, alpha, max_zeros=k, keep_trajectory=False)
    assert capped.in_N(k) == c.in_N(k)


@SETTINGS
@given(st.floats(0.5, 0.9), st.floats(0.1, 0.5), st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
def test_odd_symmetry_of_trajectories(r0, u0, scale, du0):
    a = integrate(NL, ProblemParams(r_max=10.0), InitialCondition(r0, u0 * scale, du0))
    b = integrate(NL, ProblemParams(r_max=10.0), InitialCondition(r0, -u0 * scale, -du0))
    r = np.linspace(r0, min(a.r_end, b.r_end), 25)
    ua, _ = a.sample(r)
    ub, _ = b.sample(r)
    assert np.allclose(ua, -ub, rtol=1e-12, atol=1e-12)


@SETTINGS
@given(st.floats(1.5, 9.0), st.floats(1.5, 20.0))
def test_pure_power_scaling(p, alpha):
    nl = make_nonlinearity(PurePower(p))
    q = (p - 1) / 2
    rho = np.linspace(0.2, 3.0, 15)
    ref = integrate(nl, ProblemParams(r_max=3.0), InitialCondition(0.0, 1.0))
    tr = integrate(nl, ProblemParams(r_max=3.0 / alpha ** q), InitialCondition(0.0, alpha))
    v1, _ = ref.sample(rho)
    va, _ = tr.sample(rho / alpha ** q)
    assert np.allclose(va, alpha * v1, rtol=1e-6, atol=1e-8 * alpha)


@settings(max_examples=15, deadline=None)
@given(st.floats(1.6, 20.0))
def test_s_identities_hold(alpha):
    traj = integrate(NL, fn.functional_params(), InitialCondition(0.0, alpha), max_zeros=2)
    arcs = fn.extract_arcs(traj)
    for arc in arcs[:2]:
        assert fn.check_J_ode(arc).passed
        assert fn.check_jr2_ode(arc).passed
        assert fn.check_I_ode(arc).passed


@settings(max_examples=10, deadline=None)
@given(st.floats(1.6, 4.3), st.floats(4.4, 12.0))
def test_bisection_is_bracket_independent(lo, hi):
    c = cl.classify_alpha(NL, PARAMS, lo, max_zeros=1)
    if not c.excluded_from_N(1):
        return
    rec = cl.find_boundary(NL, PARAMS, hi, lo, 1)
    assert abs(rec.alpha_star - 4.3373876800775815) < 1e-9


@SETTINGS
@given(st.floats(-40.0, 2.25))
def test_psi_roots_solve_the_quadratic(q):
    if q == 0:
        return
    N = 3.0
    psi1, psi2r = fn.psi_roots(q, N)
    assert abs(q * psi1 * psi1 - N * psi1 + 1) <= 1e-8 * max(1.0, abs(q) * psi1 * psi1, N * abs(psi1))
    # the other root enters through its reciprocal, which solves x^2 - N x + q = 0
    assert abs(psi2r * psi2r - N * psi2r + q) <= 1e-8 * max(abs(q), psi2r * psi2r, N * abs(psi2r))
