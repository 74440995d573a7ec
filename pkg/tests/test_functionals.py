import math

import numpy as np
import pytest

from radial_shooter import functionals as fn
from radial_shooter.nonlinearity import PurePower, make_nonlinearity
from radial_shooter.shooting import OutOfRange, ProblemParams, shoot

ALPHAS = (1.45, 1.6, 2.0, 3.0, 5.0, 8.0)


@pytest.fixture(scope="module")
def arcs_by_alpha(nl):
    params = fn.functional_params()
    return {a: fn.extract_arcs(shoot(nl, params, a)) for a in ALPHAS}


def test_constant_solution_has_no_arcs(nl, fparams):
    assert len(fn.extract_arcs(shoot(nl, fparams, nl.b))) == 0


def test_ground_state_like_trajectory_has_one_arc(nl, golden_states):
    traj = shoot(nl, ProblemParams(r_max=1e3, tol_u=1e-7, tol_du=1e-7), golden_states["1"]["alpha_star"])
    arcs = fn.extract_arcs(traj)
    assert len(arcs) == 1 and arcs[0].down


def test_arcs_for_small_alpha(arcs_by_alpha, nl):
    arcs = arcs_by_alpha[1.45]
    assert len(arcs) >= 2
    assert arcs[0].down and not arcs[1].down
    assert 0 < arcs[0].s_end < nl.b


def test_arc_directions_alternate(arcs_by_alpha):
    for arcs in arcs_by_alpha.values():
        dirs = [a.direction for a in arcs]
        assert all(x != y for x, y in zip(dirs, dirs[1:]))


def test_degenerate_arcs_are_reported(nl):
    traj = shoot(nl, ProblemParams(r_max=50.0), 3.0)
    arcs = fn.extract_arcs(traj, min_steps=10_000)
    assert len(arcs) == 0
    assert arcs.dropped and isinstance(arcs.dropped[0], fn.DegenerateArc)


def test_r_of_s_inverts_dense_output(arcs_by_alpha):
    arc = arcs_by_alpha[3.0][1]
    s = np.linspace(arc.s_lo, arc.s_hi, 30)[1:-1]
    u, _ = arc.parent.sample(arc.r_of_s(s))
    assert np.max(np.abs(u - s)) < 1e-12
    with pytest.raises(OutOfRange):
        arc.r_of_s(arc.s_hi + 1.0)


def test_J_of_s_examples(arcs_by_alpha, nl):
    arc = arcs_by_alpha[2.0][0]
    assert fn.J_of_s(arc, 2.0) == nl.f(2.0) / 3 == 2.0
    up = arcs_by_alpha[2.0][1]
    end = up.s_start
    # u'(rho) = 0 at an arc end with u(rho) != 0
    assert abs(fn.J_of_s(up, end)) < 1e-9
    s = np.linspace(arc.s_lo, arc.s_hi, 11)[1:-1]
    assert np.allclose(fn.J_of_s(arc, s), arc.state(s)[1], rtol=1e-6)


def test_J_positive_on_down_arcs_of_positive_u(arcs_by_alpha):
    for arcs in arcs_by_alpha.values():
        for arc in arcs:
            if arc.down:
                s = arc.s[(arc.s > 0) & (arc.s < arc.s_hi)]
                s = s[(s > arc.s_lo)]
                assert np.all(arc.J[np.isin(arc.s, s)] > 0)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_identity_residuals(arcs_by_alpha, alpha):
    for arc in arcs_by_alpha[alpha][:3]:
        for check in (fn.check_J_ode, fn.check_jr2_ode, fn.check_I_ode):
            rep = check(arc)
            assert rep.passed, (alpha, arc.index, rep)


def test_J_ode_on_stated_subrange(arcs_by_alpha):
    rep = fn.check_J_ode(arcs_by_alpha[2.0][0], s_range=(1.6, 1.95))
    assert rep.passed and rep.n_probes > 100


@pytest.mark.parametrize("alpha", (1.6, 2.0, 3.0, 5.0))
def test_J_prime_at_start(arcs_by_alpha, alpha):
    fd, expected = fn.J_prime_at_start(arcs_by_alpha[alpha][0])
    assert fd == pytest.approx(expected, rel=1e-3)


def test_J_prime_requires_origin(arcs_by_alpha):
    with pytest.raises(fn.FunctionalError):
        fn.J_prime_at_start(arcs_by_alpha[2.0][1])


def test_energy_forms_agree(arcs_by_alpha, nl):
    arc = arcs_by_alpha[3.0][0]
    s = np.linspace(arc.s_lo, arc.s_hi, 50)[1:-1]
    r = arc.r_of_s(s)
    assert np.allclose(fn.energy_I(arc, s=s), fn.energy_I(arc.parent, r=r), rtol=1e-12, atol=1e-14)
    assert fn.energy_I(arc.parent, r=0.0) == nl.F(3.0)
    assert fn.energy_I(arcs_by_alpha[2.0][0].parent, r=0.0) == 2.0


def test_energy_at_double_zero(nl, golden_states):
    params = ProblemParams(r_max=1e3, tol_u=1e-7, tol_du=1e-7)
    traj = shoot(nl, params, golden_states["1"]["alpha_star"])
    energy = fn.energy_I(traj, r=traj.r_end)
    assert abs(energy) <= 2 * params.tol_du ** 2 + abs(nl.F(params.tol_u))


@pytest.mark.parametrize("alpha", ALPHAS)
def test_sign_properties(arcs_by_alpha, alpha):
    for arc in arcs_by_alpha[alpha][:3]:
        assert fn.check_H_increasing(arc).passed
        assert fn.check_J_basics(arc).passed
        assert fn.P_prime_sign(arc).passed


def test_pohozaev_values(arcs_by_alpha, nl):
    arc = arcs_by_alpha[2.0][0]
    assert fn.pohozaev_P(arc, 2.0) == 0.0
    s = np.linspace(nl.beta + 0.01, 2.0 - 0.01, 200)
    assert np.all(fn.pohozaev_P(arc, s) < 0)
    with pytest.raises(fn.NearSingularF):
        fn.pohozaev_P(arc, 1.0)
    assert np.isnan(fn.pohozaev_P(arc, np.array([1.0, 1.5]))[0])


def test_samples_recompute_P_exactly(arcs_by_alpha, tmp_path):
    samples = fn.sample_functionals(arcs_by_alpha[3.0][0])
    again = samples.recompute_P()
    same = (again == samples.P) | (np.isnan(again) & np.isnan(samples.P))
    assert np.all(same)
    path = tmp_path / "f.csv"
    samples.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "s,r,J,I,H,P,W,psi1,psi2r"
    assert len(lines) == samples.s.size + 1


def test_W_examples(arcs_by_alpha, nl):
    arc = arcs_by_alpha[2.0][0]
    r, J = arc.state(np.array([nl.beta]))
    assert fn.peletier_serrin_W(arc, nl.beta) == pytest.approx(r[0] ** 2 * J[0], rel=1e-12)
    s = arc.s[1:-1]
    energy = fn.energy_I(arc, s=s)
    W = fn.peletier_serrin_W(arc, s[energy > 0])
    assert np.allclose(W ** 2, 2 * arc.r[1:-1][energy > 0] ** 2 * energy[energy > 0], rtol=1e-14)


def test_W_requires_positive_energy(arcs_by_alpha):
    arc = arcs_by_alpha[1.45][1]
    s = arc.s[len(arc.s) // 2]
    if fn.energy_I(arc, s=s) <= 0:
        with pytest.raises(fn.NonpositiveEnergy):
            fn.peletier_serrin_W(arc, s)


@pytest.mark.parametrize("alpha", (1.6, 2.0, 3.0, 5.0, 8.0))
def test_W_identities(arcs_by_alpha, alpha):
    recompute, deriv = fn.check_W(arcs_by_alpha[alpha][0])
    assert recompute.passed
    assert deriv.passed


def test_psi_examples(arcs_by_alpha):
    psi1, psi2r = fn.psi_bounds(arcs_by_alpha[2.0][0], 2.0)
    assert psi1 == pytest.approx(1 / 3, rel=1e-14) and psi2r == 0.0
    N = 3.0
    p1, p2r = fn.psi_roots(N * N / 4, N)
    assert p1 == pytest.approx(2 / N) and 1 / p2r == pytest.approx(2 / N)
    with pytest.raises(fn.NoRealRoots):
        fn.psi_roots(N * N / 4 + 1e-9, N)


@pytest.mark.parametrize("q", [-50.0, -1.0, -1e-6])
def test_psi_signs_for_negative_slope(q):
    psi1, psi2r = fn.psi_roots(q, 3.0)
    assert psi1 > 0 > psi2r
    # both are roots of q psi^2 - N psi + 1
    for psi in (psi1, 1 / psi2r):
        assert abs(q * psi * psi - 3.0 * psi + 1) < 1e-9 * max(1.0, abs(q * psi * psi))


@pytest.mark.parametrize("q", [1e-12, 0.3, 2.0, 2.2499])
def test_psi_roots_stable(q):
    psi1, psi2r = fn.psi_roots(q, 3.0)
    lo = 2 / (3 + math.sqrt(9 - 4 * q))
    assert psi1 == pytest.approx(lo, rel=1e-6)
    assert 0 < psi1 <= 1 / psi2r


def test_comparison_ordered(nl, fparams):
    tu = shoot(nl, fparams, 6.0, max_zeros=1)
    tv = shoot(nl, fparams, 5.0, max_zeros=1)
    rep = fn.compare_solutions(tu, tv)
    assert rep.ordered and not rep.degenerate
    assert rep.s_range[0] == 0.0
    assert rep.anchor == 5.0


def test_comparison_degenerate(nl, fparams):
    tv = shoot(nl, fparams, 5.0, max_zeros=1)
    rep = fn.compare_solutions(tv, tv)
    assert rep.degenerate and not rep.ordered


def test_comparison_supercritical_violation(fparams):
    nl7 = make_nonlinearity(PurePower(7.0))
    rep = fn.compare_solutions(shoot(nl7, fparams, 3.0), shoot(nl7, fparams, 2.0))
    assert not rep.ordered
    assert rep.first_violation is not None


def test_comparison_needs_positive_energy(nl, fparams):
    # below beta the energy of v starts negative and never recovers
    with pytest.raises(fn.NoOverlap):
        fn.compare_solutions(shoot(nl, fparams, 2.0), shoot(nl, fparams, 0.5))


def test_phase_curve_export(nl, fparams, tmp_path):
    curve = fn.phase_curve(shoot(nl, fparams, 2.0))
    assert curve.J[0] == nl.f(2.0) / 3
    path = tmp_path / "phase.csv"
    curve.to_csv(path)
    assert path.read_text().splitlines()[0] == "u,J,r"


def test_phase_curve_zero_at_extrema(nl, fparams):
    traj = shoot(nl, fparams, 3.0)
    for e in traj.events_of("ZeroOfDu"):
        assert abs(-e.du / e.r) < 1e-9


def test_figure_eight_is_detected():
    t = np.linspace(0.1, 2 * np.pi + 0.1, 157)
    pts = np.column_stack([np.sin(t), np.sin(t) * np.cos(t)])
    assert fn.self_intersection_check(pts).crossings >= 1


def test_spirals_do_not_self_intersect(nl):
    params = ProblemParams(r_max=60.0)
    for alpha in (1.45, 3.0, 4.4):
        traj = shoot(nl, params, alpha)
        assert fn.self_intersection_check(fn.phase_curve(traj)).crossings == 0
        assert all(t[3] > 0 for t in fn.winding_increments(traj))
