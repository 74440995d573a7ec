import math

import numpy as np
import pytest

from radial_shooter.nonlinearity import (
    InvalidBreakpoint,
    NoPositivePart,
    NonlinearityError,
    PowerDifference,
    PurePower,
    ShiftedPower,
    beta_power_difference,
    build_fa,
    build_fmu,
    check_hypotheses,
    critical_exponent,
    eval_df,
    eval_f,
    eval_F,
    find_beta,
    make_nonlinearity,
    model_from_dict,
    singular_constant,
    validate_model_dict,
)


def test_power_difference_values(nl):
    assert eval_f(nl, 2.0) == 6.0
    assert eval_f(nl, 0.0) == 0.0
    assert eval_f(nl, -2.0) == -6.0
    assert eval_F(nl, 2.0) == 2.0
    assert eval_F(nl, 0.0) == 0.0


def test_pure_power_primitive():
    assert eval_F(make_nonlinearity(PurePower(3.0)), 1.0) == 0.25


def test_odd_extension_is_exact(nl, rng):
    s = rng.uniform(-20, 20, 10_000)
    assert np.array_equal(eval_f(nl, -s), -eval_f(nl, s))
    assert np.array_equal(eval_F(nl, -s), eval_F(nl, s))


@pytest.mark.parametrize("p, expected", [(3.0, math.sqrt(2.0)), (2.0, 1.5)])
def test_find_beta_examples(p, expected):
    assert find_beta(make_nonlinearity(PowerDifference(p))) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("p", [2.0, 3.0, 4.0, 4.9])
def test_find_beta_matches_closed_form(p):
    beta = find_beta(make_nonlinearity(PowerDifference(p)))
    assert abs(beta - beta_power_difference(p)) < 1e-10


def test_pure_power_beta_is_zero():
    nl = make_nonlinearity(PurePower(5.0))
    assert nl.b == 0.0 and nl.beta == 0.0


def test_no_positive_part():
    class Negative:
        b = 1.0

        def f(self, s):
            return -s

        def F(self, s):
            return -0.5 * s * s

    with pytest.raises(NoPositivePart):
        make_nonlinearity(Negative(), beta_bound=1e3)


def test_structural_constants(nl):
    assert nl.b == 1.0
    assert nl.f(nl.b) == 0.0
    assert abs(nl.F(nl.beta)) < 1e-13
    assert nl.F(nl.beta - 1e-6) < 0 < nl.F(nl.beta + 1e-6)
    assert nl.kinks == ()


def _fd_check(nl, s, h=1e-5):
    dF = (eval_F(nl, s + h) - eval_F(nl, s - h)) / (2 * h)
    df = (eval_f(nl, s + h) - eval_f(nl, s - h)) / (2 * h)
    return dF, df


@pytest.mark.parametrize("model", [
    PowerDifference(3.0), PowerDifference(4.5), PurePower(7.0), ShiftedPower(7.0, 0.5),
])
def test_calculus_consistency_smooth(model):
    nl = make_nonlinearity(model)
    s = np.linspace(0.2, 3.0, 57)
    dF, df = _fd_check(nl, s)
    f = eval_f(nl, s)
    assert np.all(np.abs(dF - f) <= 1e-6 * np.maximum(1.0, np.abs(f)))
    d = eval_df(nl, s)
    assert np.all(np.abs(df - d) <= 1e-6 * np.maximum(1.0, np.abs(d)))


def test_calculus_consistency_piecewise():
    nl = build_fmu(PowerDifference(3.0), PurePower(3.0), 2.0, 0.1, 3.0, 2.0)
    s = np.linspace(0.2, 4.0, 200)
    s = s[np.min(np.abs(s[:, None] - np.array(nl.kinks)[None, :]), axis=1) > 1e-3]
    dF, df = _fd_check(nl, s, h=1e-6)
    f = eval_f(nl, s)
    assert np.all(np.abs(dF - f) <= 1e-6 * np.maximum(1.0, np.abs(f)))


def test_fmu_examples():
    nl = build_fmu(PowerDifference(3.0), PurePower(3.0), 2.0, 0.1, 10.0, 2.0)
    assert eval_f(nl, 2.1) == pytest.approx(100 * (2.1 / 2) ** 3, rel=1e-14)
    assert eval_f(nl, 2.1) == pytest.approx(115.7625, rel=1e-14)
    assert eval_f(nl, 2.0) == 6.0
    assert nl.kinks == (2.0, 2.1)


def test_fmu_identity_configuration():
    f1 = PowerDifference(3.0)
    nl = build_fmu(f1, f1, 2.0, 0.1, 1.0, 1.0)
    s = np.linspace(0.0, 6.0, 301)
    diff = np.abs(eval_f(nl, s) - f1.f(s))
    # the only deviation is the secant of f1 over the bridge
    bridge = (s > 2.0) & (s < 2.1)
    assert np.all(diff[~bridge] < 1e-12 * (1 + np.abs(f1.f(s[~bridge]))))
    secant_gap = max(abs(f1.f(t) - (f1.f(2.0) + (f1.f(2.1) - f1.f(2.0)) * (t - 2.0) / 0.1))
                     for t in np.linspace(2.0, 2.1, 101))
    assert diff[bridge].max() <= secant_gap + 1e-12


def test_fa_examples():
    nl = build_fa(PowerDifference(3.0), 2.0, 0.1, 3.0, 0.5, 7.0)
    # 9 * 2.6^7 evaluated in exact decimal arithmetic
    assert eval_f(nl, 2.1) == pytest.approx(9 * 803.18101760, rel=1e-10)
    assert eval_f(nl, 2.0) == PowerDifference(3.0).f(2.0)
    unit = build_fa(PowerDifference(3.0), 2.0, 0.1, 1.0, 0.0, 7.0)
    assert unit.model.outer(1.0) == 1.0


@pytest.mark.parametrize("builder", [
    lambda: build_fmu(PowerDifference(3.0), PurePower(3.0), 2.0, 0.1, 10.0, 2.0),
    lambda: build_fmu(PowerDifference(3.0), PurePower(5.0), 4.4, 0.05, 300.0, 7.0),
    lambda: build_fa(PowerDifference(3.0), 2.0, 0.1, 3.0, 0.5, 7.0),
    lambda: build_fa(PowerDifference(3.0), 14.2, 0.1, 30.0, 0.67, 7.0),
])
def test_piecewise_continuity(builder):
    nl = builder()
    m = nl.model
    a1, a2 = nl.kinks
    pairs = [(m.inner.f(a1), m.bridge(a1)), (m.bridge(a2), m.outer(a2))]
    for left, right in pairs:
        assert abs(left - right) < 1e-12 * (1 + abs(left))
    for k in nl.kinks:
        lo, hi = math.nextafter(k, -math.inf), math.nextafter(k, math.inf)
        jump = abs(nl.F(hi) - nl.F(lo))
        assert jump <= 4 * abs(nl.f(k)) * (hi - lo) + 1e-12 * (1 + abs(nl.F(k)))


@pytest.mark.parametrize("kwargs", [
    dict(alpha1=2.0, eps=0.0, lam=1.0, mu=1.0),
    dict(alpha1=2.0, eps=-0.1, lam=1.0, mu=1.0),
    dict(alpha1=0.0, eps=0.1, lam=1.0, mu=1.0),
    dict(alpha1=2.0, eps=0.1, lam=0.0, mu=1.0),
    dict(alpha1=2.0, eps=0.1, lam=1.0, mu=0.0),
])
def test_invalid_breakpoints(kwargs):
    with pytest.raises(InvalidBreakpoint):
        build_fmu(PowerDifference(3.0), PurePower(3.0), **kwargs)


def test_invalid_fa_shift():
    with pytest.raises(InvalidBreakpoint):
        build_fa(PowerDifference(3.0), 2.0, 0.1, 1.0, -0.5, 7.0)


def test_model_dict_round_trip():
    m = build_fmu(PowerDifference(3.0), PurePower(3.0), 2.0, 0.1, 10.0, 2.0).model
    again = model_from_dict(m.to_dict())
    assert again == m
    assert make_nonlinearity(again).hash == make_nonlinearity(m).hash


def test_model_dict_rejects_unknown_fields():
    with pytest.raises(NonlinearityError):
        validate_model_dict({"model": "power-diff", "p": 3, "q": 1})
    with pytest.raises(NonlinearityError):
        validate_model_dict({"model": "cubic"})
    with pytest.raises(NonlinearityError):
        model_from_dict({"model": "power-diff"})


def test_invalid_exponents():
    with pytest.raises(NonlinearityError):
        PowerDifference(1.0)
    with pytest.raises(NonlinearityError):
        PurePower(0.5)


@pytest.mark.parametrize("p, N", [(3.0, 3), (4.9, 3), (5.5, 3), (7.0, 3), (2.0, 4), (3.5, 4)])
def test_h2_for_pure_power(p, N):
    rep = check_hypotheses(make_nonlinearity(PurePower(p)), N, grid=(10.0, 200))
    assert rep.h2 == (p < critical_exponent(N))
    assert rep.h2_margin == pytest.approx(1 / (p + 1) - (N - 2) / (2 * N), abs=1e-12)


def test_hypotheses_default_model(nl):
    rep = check_hypotheses(nl, 3)
    assert rep.h1
    assert rep.h2
    assert rep.h3_monotone
    # value clause fails: (s f'/f)(beta) = p + 2 = 5 >= N/(N-2) = 3
    assert rep.h3_value == pytest.approx(5.0, rel=1e-10)
    assert not rep.h3_value_ok


def test_hypotheses_flag_h1_failure():
    rep = check_hypotheses(make_nonlinearity(ShiftedPower(7.0, 0.5)), 3)
    assert not rep.h1


def test_hypothesis_report_is_deterministic(nl):
    assert check_hypotheses(nl, 3) == check_hypotheses(nl, 3)


def test_singular_constant():
    assert singular_constant(3, 5) == pytest.approx(0.25 ** 0.25, abs=1e-12)
    assert critical_exponent(3) == 5.0
