"""
Nodal classification of initial values and bisection for bound states.

Verdicts follow the nested sets of the shooting picture:

* ``P 1``  the solution never reaches zero;
* ``N k``  it crosses zero transversally k times and is then trapped
  around (-1)^k b (so alpha also lies in P_{k+1});
* ``G k``  it reaches a double zero after k-1 sign changes, i.e. alpha
  is (numerically) the k-th bound state;
* ``Undetermined`` when the horizon is reached with the fate still open.

The early stop is the energy trap: I = u'^2/2 + F(u) is non-increasing
and I = u'^2/2 >= 0 at any zero of u, so once I < 0 no further zero can
occur.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .shooting import (
    DOUBLE_ZERO, REACHED_RMAX, TRAPPED, ZERO_CAP, ZERO_OF_DU, ZERO_OF_U,
    InitialCondition, ProblemParams, integrate,
)

K_CAP = 8


class ClassificationError(RuntimeError):
    pass


class BracketInvalid(ClassificationError):
    pass


class NonConvergence(ClassificationError):
    def __init__(self, message, alpha=None):
        super().__init__(message)
        self.alpha = alpha


def classification_params(**changes):
    """Default parameters for classification runs (r_max = 1e3)."""
    return ProblemParams(r_max=1e3).replace(**changes)


@dataclass
class Classification:
    alpha: float
    verdict: str
    k: int
    n_zeros: int
    zeros: list
    extrema: list
    trap: tuple | None
    termination: str
    trajectory: object = field(default=None, repr=False)

    @property
    def label(self):
        if self.verdict == "Undetermined":
            return "Undetermined"
        return f"{self.verdict} {self.k}"

    @property
    def decided(self):
        return self.verdict != "Undetermined"

    def in_N(self, k):
        """alpha in N_k: at least k transversal zeros were located."""
        return self.n_zeros >= k

    def excluded_from_N(self, k):
        """alpha certainly outside N_k."""
        return self.n_zeros < k and self.decided and not (self.verdict == "N" and self.termination == ZERO_CAP)

    @property
    def m1(self):
        return self.extrema[0][1] if self.extrema else float("nan")

    def J_at_zeros(self):
        return [-du / r for r, du in self.zeros]


def fold_trajectory(traj, k_cap=K_CAP):
    """Turn an integrated trajectory into a :class:`Classification`."""
    p = traj.params
    nl = traj.nl
    zeros = []
    double_zero = False
    for e in traj.events_of(ZERO_OF_U):
        if abs(e.du) > p.tol_du:
            zeros.append((e.r, e.du))
        else:
            double_zero = True
            break
    extrema = [(e.r, e.u) for e in traj.events_of(ZERO_OF_DU)]
    trap_events = traj.events_of("NegativeEnergyTrap")
    trap = None
    if traj.starts_trapped:
        u0, du0 = traj.sample(np.array([traj.r_start]))
        trap = (traj.r_start, float(0.5 * du0[0] ** 2 + nl.F(float(u0[0]))))
    elif trap_events:
        e = trap_events[0]
        trap = (e.r, 0.5 * e.du ** 2 + nl.F(e.u))
    n = len(zeros)
    alpha = traj.ic.alpha

    if double_zero or traj.termination == DOUBLE_ZERO:
        verdict, k = "G", n + 1
    elif trap is not None and (traj.termination == TRAPPED or traj.starts_trapped):
        verdict, k = ("P", 1) if n == 0 else ("N", n)
    elif traj.termination == ZERO_CAP:
        verdict, k = "N", n
    elif traj.termination == REACHED_RMAX and _asymptote_to_b(traj, n):
        verdict, k = ("P", 1) if n == 0 else ("N", n)
    elif trap is not None:
        # trapped without stopping (debug runs): the fate is still decided
        zeros_before = [z for z in zeros if z[0] <= trap[0]]
        n = len(zeros_before)
        verdict, k = ("P", 1) if n == 0 else ("N", n)
    else:
        verdict, k = "Undetermined", n
    if n >= k_cap and verdict != "G":
        verdict, k = "N", n
    return Classification(alpha, verdict, k, n, zeros, extrema, trap, traj.termination, traj)


def _asymptote_to_b(traj, n):
    p = traj.params
    if traj.r_end < 0.9 * p.r_max:
        return False
    u, du = traj.final
    target = (-1) ** n * traj.nl.b
    return abs(u - target) < 1e-6 and abs(du) < 1e-8


def classify_alpha(nl, params, alpha, *, k_cap=K_CAP, max_zeros=None, keep_trajectory=True,
                   stop_on_trap=True):
    """Classify alpha by integrating from the origin until its fate is known."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    cap = k_cap if max_zeros is None else min(k_cap, max_zeros)
    traj = integrate(nl, params, InitialCondition(0.0, float(alpha)),
                     stop_on_trap=stop_on_trap, max_zeros=cap)
    cls = fold_trajectory(traj, k_cap)
    if not keep_trajectory:
        cls.trajectory = None
    return cls


def classify_ic(nl, params, ic, *, k_cap=K_CAP):
    """Classify a solution started from interior data (r0 > 0)."""
    traj = integrate(nl, params, ic, stop_on_trap=True, max_zeros=k_cap)
    return fold_trajectory(traj, k_cap)


def markers(traj):
    """rho_i, m_i = u(rho_i) from the extrema and Z_j from the zeros of u."""
    rho = [(e.r, e.u) for e in traj.events_of(ZERO_OF_DU)]
    Z = [(e.r, e.du) for e in traj.events_of(ZERO_OF_U)]
    return {"rho": [r for r, _ in rho], "m": [m for _, m in rho], "Z": [r for r, _ in Z],
            "du_at_Z": [d for _, d in Z]}


# ---------------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------------

@dataclass
class ScanRow:
    alpha: float
    verdict: str
    k: int
    m1: float
    J_at_zero: list
    runtime_ms: float

    @property
    def label(self):
        return "Undetermined" if self.verdict == "Undetermined" else f"{self.verdict} {self.k}"

    def in_N(self, k):
        if self.verdict == "N":
            return self.k >= k
        if self.verdict == "G":
            return self.k - 1 >= k
        return len(self.J_at_zero) >= k


def _scan_one(args):
    nl, params, alpha, k_cap = args
    t0 = time.perf_counter()
    c = classify_alpha(nl, params, alpha, k_cap=k_cap, keep_trajectory=False)
    dt = 1e3 * (time.perf_counter() - t0)
    return ScanRow(float(alpha), c.verdict, c.k, c.m1, c.J_at_zeros(), dt)


def resolve_jobs(jobs=None):
    if jobs is None:
        jobs = int(os.environ.get("RADIAL_SHOOTER_JOBS", "1") or 1)
    return max(1, int(jobs))


def scan_alphas(nl, params, alphas, *, k_cap=K_CAP, jobs=None):
    jobs = resolve_jobs(jobs)
    work = [(nl, params, float(a), k_cap) for a in alphas]
    if jobs == 1:
        return [_scan_one(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        # map preserves input order
        return list(ex.map(_scan_one, work, chunksize=max(1, len(work) // (4 * jobs))))


def scan_range(nl, params, alpha_lo, alpha_hi, n, *, k_cap=K_CAP, jobs=None):
    """Classify a uniform alpha grid of ``n`` points."""
    if not alpha_lo < alpha_hi:
        raise ValueError("need alpha_lo < alpha_hi")
    if n < 2:
        raise ValueError("need n >= 2")
    return scan_alphas(nl, params, np.linspace(alpha_lo, alpha_hi, n), k_cap=k_cap, jobs=jobs)


def adjacencies(rows):
    """Neighbouring rows with different decided verdicts."""
    out = []
    for a, b in zip(rows, rows[1:]):
        if a.verdict == "Undetermined" or b.verdict == "Undetermined":
            continue
        if a.label != b.label:
            out.append((a, b))
    return out


def brackets_for(rows, k):
    """(alpha_in_N, alpha_out) pairs where membership in N_k flips."""
    out = []
    for a, b in zip(rows, rows[1:]):
        if "Undetermined" in (a.verdict, b.verdict):
            continue
        if a.in_N(k) != b.in_N(k):
            out.append((a.alpha, b.alpha) if a.in_N(k) else (b.alpha, a.alpha))
    return out


def write_scan_csv(rows, target):
    """Write scan rows to a path or an open text stream."""
    if hasattr(target, "write"):
        _write_scan_rows(rows, target)
        return
    with open(target, "w", newline="") as fh:
        _write_scan_rows(rows, fh)


def _write_scan_rows(rows, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["alpha", "verdict", "k", "m1", "runtime_ms"])
    for row in rows:
        w.writerow([format(row.alpha, ".17g"), row.verdict, row.k,
                    format(row.m1, ".17g"), format(row.runtime_ms, ".3f")])


# ---------------------------------------------------------------------------
# bisection
# ---------------------------------------------------------------------------

@dataclass
class BoundStateRecord:
    alpha_star: float
    bracket: tuple
    k: int
    final_u: float
    final_du: float
    iterations: int
    witness: object = field(default=None, repr=False)

    def to_dict(self):
        return {
            "alpha_star": self.alpha_star,
            "bracket": list(self.bracket),
            "k": self.k,
            "final_u": self.final_u,
            "final_du": self.final_du,
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def closest_approach(traj, k):
    """Point of the trajectory nearest to (u, u') = (0, 0) after Z_{k-1}.

    For a converged bracket this is the numerical double zero of the
    k-th bound state.  Returns (r, u, du).
    """
    zeros = traj.events_of(ZERO_OF_U)
    r_from = zeros[k - 2].r if k >= 2 and len(zeros) >= k - 1 else traj.r_start
    r_to = traj.r_end
    if len(zeros) >= k:
        # past the k-th crossing the distance only grows again
        r_to = min(r_to, zeros[k - 1].r)
    rr, u, du = traj.nodes()
    sel = (rr >= r_from) & (rr <= r_to)
    if not np.any(sel):
        u0, du0 = traj.final
        return traj.r_end, u0, du0
    idx = np.flatnonzero(sel)
    d = u[idx] ** 2 + du[idx] ** 2
    j = idx[int(np.argmin(d))]
    lo = rr[max(j - 1, 0)]
    hi = rr[min(j + 1, rr.size - 1)]
    lo, hi = max(lo, r_from), min(hi, r_to)

    def dist(r):
        a, b = traj(r)
        return a * a + b * b

    if hi > lo:
        res = minimize_scalar(dist, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, hi)})
        r_best = float(res.x) if res.fun < d.min() else float(rr[j])
    else:
        r_best = float(rr[j])
    ub, dub = traj(r_best)
    return r_best, ub, dub


def _witness(cls_n, cls_c, k):
    best = None
    for c in (cls_n, cls_c):
        _, u, du = closest_approach(c.trajectory, k)
        score = max(abs(u), abs(du))
        if best is None or score < best[0]:
            best = (score, c, u, du)
    return best


def find_boundary(nl, params, alpha_in_N, alpha_in_coN, k, tol_alpha=1e-10, max_iter=200,
                  witness_tol=1e-8):
    """Bisect between alpha in N_k and alpha outside N_k.

    The limit point is a k-th bound state.  Bisection runs until the
    bracket is narrower than ``tol_alpha``; it then keeps halving while
    neither endpoint passes within ``witness_tol`` of a double zero, until
    the bracket reaches floating-point resolution.  An input bracket
    already narrower than ``tol_alpha`` is returned as it is.  The distance to the
    double zero only shrinks like the square root of the bracket width,
    so this last stage is what makes the witness small.

    Returns a :class:`BoundStateRecord` whose ``alpha_star`` and witness
    belong to the endpoint trajectory closest to a double zero.
    """
    cls_n = classify_alpha(nl, params, alpha_in_N, max_zeros=k)
    cls_c = classify_alpha(nl, params, alpha_in_coN, max_zeros=k)
    if not cls_n.in_N(k):
        raise BracketInvalid(f"alpha = {alpha_in_N} is not in N_{k} ({cls_n.label})")
    if not cls_c.excluded_from_N(k):
        raise BracketInvalid(f"alpha = {alpha_in_coN} is not outside N_{k} ({cls_c.label})")
    a_n, a_c = float(alpha_in_N), float(alpha_in_coN)
    it = 0
    while it < max_iter:
        if abs(a_n - a_c) < tol_alpha and (it == 0 or _witness(cls_n, cls_c, k)[0] < witness_tol):
            break
        mid = 0.5 * (a_n + a_c)
        if mid in (a_n, a_c):
            break
        c = classify_alpha(nl, params, mid, max_zeros=k)
        if c.in_N(k):
            a_n, cls_n = mid, c
        elif c.excluded_from_N(k):
            a_c, cls_c = mid, c
        else:
            raise NonConvergence(f"undetermined verdict inside the bracket at alpha = {mid!r}", mid)
        it += 1
    if abs(a_n - a_c) >= tol_alpha:
        raise NonConvergence(f"bracket width {abs(a_n - a_c)} above {tol_alpha} after {it} steps", a_n)
    _, wit, u, du = _witness(cls_n, cls_c, k)
    lo, hi = sorted((a_n, a_c))
    return BoundStateRecord(wit.alpha, (lo, hi), k, float(u), float(du), it, wit.trajectory)


def bound_states_from_scan(nl, params, rows, k, tol_alpha=1e-10):
    """Converge every N_k flip found in a scan."""
    out = []
    for a_in, a_out in brackets_for(rows, k):
        try:
            out.append(find_boundary(nl, params, a_in, a_out, k, tol_alpha))
        except ClassificationError:
            continue
    return out


def locate_bound_state(nl, params, k, alpha_lo, alpha_hi, n=200, tol_alpha=1e-10, jobs=None):
    """First k-th bound state above ``alpha_lo`` found by scan and bisection."""
    rows = scan_range(nl, params, alpha_lo, alpha_hi, n, jobs=jobs)
    brackets = brackets_for(rows, k)
    if not brackets:
        raise BracketInvalid(f"no N_{k} flip in [{alpha_lo}, {alpha_hi}] on a {n}-point grid")
    first = min(brackets, key=lambda b: min(b))
    return find_boundary(nl, params, first[0], first[1], k, tol_alpha)


def confirm_bound_state(nl, params, alpha, k, tol=1e-6):
    """Re-integrate at ``alpha`` and test for a k-th double zero.

    The verdict is ``G k`` when the trajectory, after exactly k-1
    transversal zeros, passes within ``tol`` of (u, u') = (0, 0).
    Returns (label, u, du) at the closest approach.
    """
    c = classify_alpha(nl, params, alpha, max_zeros=k)
    r_c, u, du = closest_approach(c.trajectory, k)
    before = sum(1 for e in c.trajectory.events_of(ZERO_OF_U) if e.r < r_c and abs(e.du) > tol)
    if max(abs(u), abs(du)) < tol and before == k - 1:
        return f"G {k}", float(u), float(du)
    return c.label, float(u), float(du)
