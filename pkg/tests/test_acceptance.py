"""Acceptance criteria for the default model s^3 - s in three dimensions.

Each test carries its own runtime budget and prints a PASS/FAIL line in
the terminal summary.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from radial_shooter import classify as cl
from radial_shooter import experiments as ex
from radial_shooter import functionals as fn
from radial_shooter.cli import run_suite
from radial_shooter.nonlinearity import PowerDifference, PurePower, singular_constant
from radial_shooter.shooting import InitialCondition, ProblemParams, integrate

acceptance = pytest.mark.acceptance


@contextmanager
def budget(seconds):
    t0 = time.perf_counter()
    yield
    elapsed = time.perf_counter() - t0
    assert elapsed < seconds, f"took {elapsed:.1f} s, budget {seconds} s"


@acceptance(1, "J initialization and J'(alpha)")
def test_01_j_initialization(nl):
    with budget(1.0):
        params = ProblemParams(r_max=1.0)
        for alpha in (1.6, 2.0, 3.0, 5.0):
            traj = integrate(nl, params, InitialCondition(0.0, alpha))
            _, du = traj.sample(np.array([1e-3]))
            J0 = nl.f(alpha) / 3
            assert abs(-du[0] / 1e-3 - J0) <= 1e-5 * abs(J0)
            arc = fn.extract_arcs(integrate(nl, fn.functional_params(), InitialCondition(0.0, alpha)))[0]
            fd, expected = fn.J_prime_at_start(arc)
            assert abs(fd - expected) <= 1e-3 * abs(expected)


@acceptance(2, "identity residuals below 1e-5")
def test_02_identity_residuals(nl):
    with budget(5.0):
        report = run_suite("functionals", nl)
        assert report["passed"], report["failures"]
        worst = max(r["max_rel"] for d in report["details"] for r in d["residuals"])
        assert worst < 1e-5


@acceptance(3, "Pohozaev sign")
def test_03_pohozaev_sign(nl):
    with budget(2.0):
        for alpha in (2.0, 4.0, 8.0):
            arc = fn.extract_arcs(integrate(nl, fn.functional_params(), InitialCondition(0.0, alpha)))[0]
            assert abs(fn.pohozaev_P(arc, alpha)) <= 1e-10
            s = np.linspace(nl.beta + 0.01, alpha - 0.01, 400)
            assert np.all(fn.pohozaev_P(arc, s) < 0)


@acceptance(4, "comparison of J over 20 pairs in N 1")
def test_04_comparison(nl, golden_states, rng):
    with budget(10.0):
        lo = golden_states["1"]["alpha_star"] + 0.05
        hi = golden_states["2"]["alpha_star"] - 0.05
        params = fn.functional_params()
        checked = 0
        while checked < 20:
            a_v, a_u = np.sort(rng.uniform(lo, hi, 2))
            if a_u - a_v < 1e-3:
                continue
            labels = [cl.classify_alpha(nl, cl.classification_params(), a, keep_trajectory=False).label
                      for a in (a_u, a_v)]
            assert labels == ["N 1", "N 1"]
            tu = integrate(nl, params, InitialCondition(0.0, a_u), max_zeros=1)
            tv = integrate(nl, params, InitialCondition(0.0, a_v), max_zeros=1)
            rep = fn.compare_solutions(tu, tv)
            assert rep.ordered, (a_u, a_v, rep.first_violation)
            assert rep.s_range[0] == 0.0
            checked += 1


@acceptance(5, "spiral shape without self-intersections")
def test_05_spiral_shape(nl):
    with budget(2.0):
        report = run_suite("shape", nl)
        assert report["passed"], report["failures"]
        assert {d["case"] for d in report["details"]} == {"near_ground_state", "deep_P1"}


@acceptance(6, "scan, bisection and golden ground state")
def test_06_classification_bisection(nl, cparams, golden_states):
    with budget(30.0):
        rows = cl.scan_range(nl, cparams, 1.5, 12.0, 60, jobs=1)
        adj = [(a, b) for a, b in cl.adjacencies(rows) if {a.label, b.label} == {"P 1", "N 1"}]
        assert adj
        a, b = adj[0]
        a_in, a_out = (a.alpha, b.alpha) if a.label == "N 1" else (b.alpha, a.alpha)
        rec = cl.find_boundary(nl, cparams, a_in, a_out, 1, tol_alpha=1e-10)
        lo, hi = rec.bracket
        assert hi - lo < 1e-10
        # endpoint verdicts are stable on re-classification: the N 1 side stays in N_1
        inside, outside = (hi, lo) if a_in > a_out else (lo, hi)
        assert cl.classify_alpha(nl, cparams, inside, max_zeros=1).in_N(1)
        assert cl.classify_alpha(nl, cparams, outside, max_zeros=1).excluded_from_N(1)
        label, u, du = cl.confirm_bound_state(nl, cparams, rec.alpha_star, 1)
        assert label == "G 1"
        assert abs(u) < 1e-6 and abs(du) < 1e-6
        assert abs(rec.alpha_star - golden_states["1"]["alpha_star"]) < 1e-9


@acceptance(7, "trap soundness over 100 random trapped runs")
def test_07_trap_soundness(nl, cparams, rng):
    with budget(60.0):
        found = 0
        while found < 100:
            alpha = float(rng.uniform(nl.beta, 30.0))
            c = cl.classify_alpha(nl, cparams, alpha, keep_trajectory=False)
            if c.trap is None:
                continue
            full = integrate(nl, cparams, InitialCondition(0.0, alpha), stop_on_trap=False)
            assert full.r_end == pytest.approx(cparams.r_max)
            later = [e for e in full.events_of("ZeroOfU") if e.r > c.trap[0]]
            assert not later, (alpha, c.trap, later[0].r)
            found += 1


@acceptance(8, "band crossing bounds")
def test_08_lemma_epsilon(nl):
    with budget(2.0):
        rep = ex.lemma_epsilon_check(nl, ProblemParams(r_max=50.0), ex.default_fixtures())
        assert rep["passed"]
        for row in rep["rows"]:
            fx = row["fixture"]
            assert row["radius_ok"] and row["lower_ok"] and row["upper_ok"]
            assert abs(row["B"] - row["B_root"]) <= 1e-12 * row["B"]
            assert abs(row["B"] - fx["zeta"] / (fx["zeta"] - fx["delta"])) <= 1e-12 * row["B"]


@acceptance(9, "pure-power scaling and C(3, 5)")
def test_09_scaling():
    with budget(5.0):
        rep = ex.scaling_checks(5, 3, alpha_grid=(2.0, 10.0, 100.0))
        tol = 10 * ProblemParams().rel_tol
        assert all(row["max_rel"] < tol for row in rep["identity"])
        assert abs(singular_constant(3, 5) - 0.25 ** 0.25) <= 1e-12


@acceptance(10, "limit trends in lambda")
def test_10_limit_trends():
    with budget(300.0):
        f1, f2 = PowerDifference(3.0), PurePower(3.0)
        grid = np.logspace(1, 4, 13)
        paso = ex.paso_e_check(f1, f2, 3.0, 0.1, 1.0, grid, 4.0)
        assert paso["max_dev"] < 1e-6
        assert paso["checks"]["monotone_top_decade"] and paso["checks"]["lower_bound"]
        sweep = ex.s_lambda_sweep(f1, f2, 3.0, 0.1, 1.0, 4.0, grid)
        assert sweep["checks"]["s_monotone"] and sweep["checks"]["J_over_f_monotone"]
        assert sweep["checks"]["minimum_found_top_decade"]


@acceptance(11, "several ground states and identity configuration")
def test_11_theorem_a_golden():
    with budget(900.0):
        golden = ex.load_golden("golden_a.json")
        config, expected = ex.split_experiment_file(golden)
        report = ex.run_theorem_a(config, jobs=1)
        ground = {round(rec["alpha_star"], 8) for cell in report.cells for rec in cell["inventory"][1]}
        assert len(ground) >= 2
        assert any(len(cell["inventory"][1]) >= 2 for cell in report.cells)
        assert report.tables["identity"]["match"]
        assert report.checks["round_trip"] and report.checks["budget"]
        cmp = ex.compare_to_golden(report, expected)
        assert cmp["match"], cmp["problems"]


@acceptance(12, "reflection bound after the first zero")
def test_12_reflection(nl, cparams, alpha_star1):
    with budget(2.0):
        alpha = alpha_star1 + 1e-6
        assert cl.classify_alpha(nl, cparams, alpha, keep_trajectory=False).label == "N 1"
        traj = integrate(nl, cparams, InitialCondition(0.0, alpha), stop_on_trap=False)
        z1 = traj.events_of("ZeroOfU")[0].r
        r = np.linspace(z1, traj.r_end, 200_001)[1:]
        u, _ = traj.sample(r)
        rn, un, _ = traj.nodes()
        peak = max(np.max(np.abs(u)), np.max(np.abs(un[rn > z1])))
        assert peak < nl.beta
