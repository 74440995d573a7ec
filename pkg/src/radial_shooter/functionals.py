"""
The J operator and the functionals built on it.

On a monotone arc of a solution u(r) the inverse r(s) is well defined and

    J(s) = -u'(r(s)) / r(s) = -1 / (r(s) r'(s)).

J is kept signed, so on increasing arcs it is negative and every identity
below holds on both arc directions:

    J'     = (N - f/J) / r^2
    (Jr^2)' = (N - 2) - f/J
    I(s)   = r^2 J^2 / 2 + F(s),          I' = (N - 1) J
    H(s)   = r^(2(N-1)) I(s),             H' = -2 (N-1) r^(2N-4) F / J
    P(s)   = r^N (2N (F/f) J - r^2 J^2 - 2F),
             P' = (2N (F/f)' - (N - 2)) r^N J
    W(s)   = r sqrt(2 I)

Finite-difference checks sample r(s) by inverting the dense output to
machine precision, so their quality does not depend on the step layout.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .shooting import ZERO_OF_DU, ZERO_OF_U, OutOfRange, ProblemParams

F_EXCLUDE = 1e-8
J_EXCLUDE = 1e-8
END_EXCLUDE = 1e-3
N_NODES = 256
W_EDGE = 0.05


class FunctionalError(ValueError):
    pass


class DegenerateArc(FunctionalError):
    pass


class NearSingularF(FunctionalError):
    pass


class NonpositiveEnergy(FunctionalError):
    pass


class NoRealRoots(FunctionalError):
    pass


class NoOverlap(FunctionalError):
    pass


def functional_params(**changes):
    """Default parameters for functional probes (r_max = 50)."""
    return ProblemParams(r_max=50.0).replace(**changes)


def _vec(nl, name, s):
    fn = getattr(nl, name)
    s = np.asarray(s, dtype=float)
    return np.fromiter((fn(float(x)) for x in s.ravel()), float, s.size).reshape(s.shape)


# ---------------------------------------------------------------------------
# arcs
# ---------------------------------------------------------------------------

@dataclass
class MonotoneArc:
    """One monotone piece of a trajectory, parameterized by s = u.

    ``r_a < r_b`` are the radii of the arc ends, ``s_start = u(r_a)`` and
    ``s_end = u(r_b)``.  The resampled nodes ``s``, ``r``, ``J`` are sorted
    by increasing s.
    """

    index: int
    direction: str
    r_a: float
    r_b: float
    s_start: float
    s_end: float
    n_steps: int
    parent: object = field(repr=False)
    s: np.ndarray = field(default=None, repr=False)
    r: np.ndarray = field(default=None, repr=False)
    J: np.ndarray = field(default=None, repr=False)

    @property
    def s_lo(self):
        return min(self.s_start, self.s_end)

    @property
    def s_hi(self):
        return max(self.s_start, self.s_end)

    @property
    def N(self):
        return self.parent.params.N

    @property
    def nl(self):
        return self.parent.nl

    @property
    def down(self):
        return self.direction == "down"

    def contains(self, s):
        s = np.asarray(s, dtype=float)
        return (s >= self.s_lo) & (s <= self.s_hi)

    def r_of_s(self, s):
        """Radius where u = s, by bisection on the dense output."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(~self.contains(s)):
            raise OutOfRange(f"s outside [{self.s_lo}, {self.s_hi}] on arc {self.index}")
        lo = np.full(s.shape, self.r_a)
        hi = np.full(s.shape, self.r_b)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            u, _ = self.parent.sample(mid)
            # past the target when u has moved beyond s in the arc direction
            past = (u < s) if self.down else (u > s)
            hi = np.where(past, mid, hi)
            lo = np.where(past, lo, mid)
        r = 0.5 * (lo + hi)
        r[s == self.s_start] = self.r_a
        r[s == self.s_end] = self.r_b
        return r

    def state(self, s):
        """(r, J) at the values s, computed from the dense output."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        r = self.r_of_s(s)
        _, du = self.parent.sample(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            J = -du / r
        at_origin = r == 0.0
        if np.any(at_origin):
            J[at_origin] = _vec(self.nl, "f", s[at_origin]) / self.N
        return r, J


class ArcList(list):
    """List of arcs, with the dropped degenerate arcs kept in ``dropped``."""

    def __init__(self, arcs=(), dropped=()):
        super().__init__(arcs)
        self.dropped = list(dropped)


def chebyshev_nodes(a, b, n):
    """Chebyshev-Lobatto nodes on [a, b] in increasing order."""
    k = np.arange(n)
    x = -np.cos(np.pi * k / (n - 1))
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * x
    nodes[0], nodes[-1] = a, b
    return nodes


def extract_arcs(traj, n_nodes=N_NODES, min_steps=4):
    """Split a trajectory at its extrema into monotone arcs.

    Arcs resting on fewer than ``min_steps`` accepted steps are dropped
    and listed in ``ArcList.dropped`` as :class:`DegenerateArc` errors.
    """
    rr, _, du_nodes = traj.nodes()
    if not np.any(np.abs(du_nodes) > 0.0):
        return ArcList()
    cuts = [traj.r_start] + [e.r for e in traj.events_of(ZERO_OF_DU)] + [traj.r_end]
    arcs, dropped = [], []
    for i, (ra, rb) in enumerate(zip(cuts, cuts[1:]), start=1):
        if not rb > ra:
            continue
        (ua, ub), _ = traj.sample(np.array([ra, rb]))
        _, dmid = traj.sample(np.array([0.5 * (ra + rb)]))
        ua, ub = float(ua), float(ub)
        direction = "down" if dmid[0] < 0 else "up"
        n_steps = int(np.count_nonzero((rr >= ra) & (rr <= rb)))
        if n_steps < min_steps or ua == ub:
            dropped.append(DegenerateArc(f"arc {i} on [{ra}, {rb}] spans {n_steps} samples"))
            continue
        arc = MonotoneArc(i, direction, float(ra), float(rb), float(ua), float(ub), n_steps, traj)
        arc.s = chebyshev_nodes(arc.s_lo, arc.s_hi, n_nodes)
        arc.r, arc.J = arc.state(arc.s)
        arcs.append(arc)
    return ArcList(arcs, dropped)


def first_arc(traj, n_nodes=N_NODES):
    arcs = extract_arcs(traj, n_nodes)
    if not arcs or arcs[0].index != 1:
        raise DegenerateArc("trajectory has no usable first arc")
    return arcs[0]


def J_of_s(arc, s):
    """J on the arc by monotone cubic interpolation of the resampled nodes.

    At the start of a solution issued from the origin the exact value
    f(alpha)/N is returned.
    """
    s_arr = np.asarray(s, dtype=float)
    if np.any(~arc.contains(s_arr)):
        raise OutOfRange(f"s outside [{arc.s_lo}, {arc.s_hi}]")
    out = PchipInterpolator(arc.s, arc.J)(s_arr)
    if arc.r_a == 0.0:
        out = np.where(s_arr == arc.s_start, arc.nl.f(arc.s_start) / arc.N, out)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# finite-difference machinery
# ---------------------------------------------------------------------------

@dataclass
class ResidualReport:
    name: str
    max_rel: float
    worst_s: float
    n_probes: int
    tol: float
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return self.n_probes > 0 and self.max_rel < self.tol

    @property
    def vacuous(self):
        return self.n_probes == 0

    def to_dict(self):
        return {"name": self.name, "max_rel": self.max_rel, "worst_s": self.worst_s,
                "n_probes": self.n_probes, "tol": self.tol, "passed": self.passed}


def probe_points(arc, s_range=None, n=200, exclude_J=True):
    """Probe abscissae with the exclusion zones removed."""
    width = arc.s_hi - arc.s_lo
    margin = END_EXCLUDE * width
    lo, hi = arc.s_lo + margin, arc.s_hi - margin
    if s_range is not None:
        lo, hi = max(lo, s_range[0]), min(hi, s_range[1])
    if not hi > lo:
        return np.empty(0)
    s = np.linspace(lo, hi, n)
    keep = np.abs(_vec(arc.nl, "f", s)) >= F_EXCLUDE
    if exclude_J:
        _, J = arc.state(s)
        keep &= np.abs(J) >= J_EXCLUDE
    for k in arc.nl.kinks:
        for kk in (k, -k):
            keep &= np.abs(s - kk) > 1e-3 * width
    return s[keep]


def fd_steps(arc, s):
    """Per-probe FD step: small against the arc and against the nearest end."""
    width = arc.s_hi - arc.s_lo
    d = np.minimum(s - arc.s_lo, arc.s_hi - s)
    return np.minimum(2e-4 * width, d / 20.0)


def fd5(g, s, h):
    """Fourth-order central difference of a vectorized g."""
    return (-g(s + 2 * h) + 8 * g(s + h) - 8 * g(s - h) + g(s - 2 * h)) / (12 * h)


def _residual_report(name, s, lhs, rhs, scale, tol):
    if s.size == 0:
        return ResidualReport(name, 0.0, math.nan, 0, tol, ["no admissible probes"])
    rel = np.abs(lhs - rhs) / scale
    j = int(np.argmax(rel))
    return ResidualReport(name, float(rel[j]), float(s[j]), int(s.size), tol)


def _J_only(arc):
    return lambda s: arc.state(s)[1]


def check_J_ode(arc, s_range=None, n=200, tol=1e-5):
    """FD dJ/ds against (N - f/J)/r^2."""
    s = probe_points(arc, s_range, n)
    if s.size == 0:
        return _residual_report("J'", s, None, None, None, tol)
    N = arc.N
    h = fd_steps(arc, s)
    r, J = arc.state(s)
    f = _vec(arc.nl, "f", s)
    lhs = fd5(_J_only(arc), s, h)
    rhs = (N - f / J) / r ** 2
    scale = (N + np.abs(f / J)) / r ** 2
    return _residual_report("J'", s, lhs, rhs, scale, tol)


def J_prime_at_start(arc, h=None):
    """One-sided second-order FD of J at the start of an arc from the origin.

    Returns (fd_value, f'(alpha)/(N+2)).
    """
    if arc.r_a != 0.0:
        raise FunctionalError("arc does not start at the origin")
    a = arc.s_start
    if h is None:
        h = 1e-4 * (arc.s_hi - arc.s_lo)
    sgn = -1.0 if arc.down else 1.0
    _, J = arc.state(np.array([a, a + sgn * h, a + 2 * sgn * h]))
    fd = (-3 * J[0] + 4 * J[1] - J[2]) / (2 * sgn * h)
    return float(fd), arc.nl.df(a) / (arc.N + 2.0)


def jr2(arc, s):
    r, J = arc.state(s)
    out = J * r ** 2
    return float(out[0]) if np.ndim(s) == 0 else out


def check_jr2_ode(arc, s_range=None, n=200, tol=1e-5):
    """FD d(J r^2)/ds against (N - 2) - f/J."""
    s = probe_points(arc, s_range, n)
    if s.size == 0:
        return _residual_report("(Jr^2)'", s, None, None, None, tol)
    N = arc.N
    h = fd_steps(arc, s)
    _, J = arc.state(s)
    f = _vec(arc.nl, "f", s)
    lhs = fd5(lambda x: jr2(arc, x), s, h)
    rhs = (N - 2.0) - f / J
    scale = (N - 2.0) + np.abs(f / J)
    return _residual_report("(Jr^2)'", s, lhs, rhs, scale, tol)


# ---------------------------------------------------------------------------
# energy-type functionals
# ---------------------------------------------------------------------------

def energy_I(obj, r=None, s=None):
    """I = u'^2/2 + F(u) on a trajectory at radii r, or r^2 J^2/2 + F(s) on an arc."""
    if isinstance(obj, MonotoneArc):
        if s is None:
            raise ValueError("an arc needs s")
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        rr, J = obj.state(s_arr)
        out = 0.5 * (rr * J) ** 2 + _vec(obj.nl, "F", s_arr)
        return float(out[0]) if np.ndim(s) == 0 else out
    if r is None:
        raise ValueError("a trajectory needs r")
    _, out = obj.energy(np.atleast_1d(np.asarray(r, dtype=float)))
    return float(out[0]) if np.ndim(r) == 0 else out


def check_I_ode(arc, s_range=None, n=200, tol=1e-5):
    """FD dI/ds against (N - 1) J."""
    s = probe_points(arc, s_range, n)
    if s.size == 0:
        return _residual_report("I'", s, None, None, None, tol)
    N = arc.N
    h = fd_steps(arc, s)
    _, J = arc.state(s)
    f = _vec(arc.nl, "f", s)
    lhs = fd5(lambda x: energy_I(arc, s=x), s, h)
    rhs = (N - 1.0) * J
    scale = (N - 1.0) * np.abs(J) + np.abs(f)
    return _residual_report("I'", s, lhs, rhs, scale, tol)


def H_functional(arc, s):
    r, J = arc.state(np.atleast_1d(s))
    out = r ** (2 * (arc.N - 1)) * energy_I(arc, s=np.atleast_1d(s))
    return float(out[0]) if np.ndim(s) == 0 else out


@dataclass
class SignReport:
    name: str
    n_probes: int
    violations: list
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.violations

    def to_dict(self):
        return {"name": self.name, "n_probes": self.n_probes,
                "violations": [float(v) for v in self.violations], "passed": self.passed}


def check_H_increasing(arc, s_range=None, n=200):
    """H is increasing in s wherever F < 0 and J > 0."""
    s = probe_points(arc, s_range, n)
    if s.size:
        _, J = arc.state(s)
        s = s[(_vec(arc.nl, "F", s) < 0) & (J > 0)]
    if s.size == 0:
        return SignReport("H' > 0", 0, [], ["no probes with F < 0 and J > 0"])
    h = fd_steps(arc, s)
    dH = fd5(lambda x: H_functional(arc, x), s, h)
    return SignReport("H' > 0", int(s.size), list(s[dH <= 0]))


def check_J_basics(arc, s_range=None, n=200, rel_gap=1e-6):
    """sign J' = sign(J - f/N) and sign r'' = sign(J - f/(N-1)) on down-arcs.

    Probes where the reference quantity is within ``rel_gap`` of zero are
    skipped.
    """
    s = probe_points(arc, s_range, n)
    N = arc.N
    if not arc.down or s.size == 0:
        return SignReport("J basics", 0, [], ["vacuous"])
    h = fd_steps(arc, s)
    r, J = arc.state(s)
    f = _vec(arc.nl, "f", s)
    dJ = fd5(_J_only(arc), s, h)
    r_of = lambda x: arc.r_of_s(x)  # noqa: E731
    d2r = (-r_of(s + 2 * h) + 16 * r_of(s + h) - 30 * r + 16 * r_of(s - h) - r_of(s - 2 * h)) / (12 * h * h)
    g1 = J - f / N
    g2 = J - f / (N - 1.0)
    scale = np.abs(J) + np.abs(f)
    bad = []
    ok1 = np.abs(g1) > rel_gap * scale
    bad += list(s[ok1 & (np.sign(dJ) != np.sign(g1))])
    ok2 = np.abs(g2) > rel_gap * scale
    bad += list(s[ok2 & (np.sign(d2r) != np.sign(g2))])
    return SignReport("J basics", int(s.size), sorted(bad))


def _F_over_f_prime(nl, s):
    f = _vec(nl, "f", s)
    return 1.0 - _vec(nl, "F", s) * _vec(nl, "df", s) / f ** 2


def pohozaev_P(arc, s):
    """P(s) = r^N (2N (F/f) J - r^2 J^2 - 2F).

    Scalar input with |f(s)| < 1e-8 raises :class:`NearSingularF`; array
    input returns NaN there.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    f = _vec(arc.nl, "f", s_arr)
    sing = np.abs(f) < F_EXCLUDE
    if np.ndim(s) == 0 and sing[0]:
        raise NearSingularF(f"|f({float(s)})| < {F_EXCLUDE}")
    r, J = arc.state(s_arr)
    return _pohozaev(arc.N, s_arr, r, J, f, _vec(arc.nl, "F", s_arr), np.ndim(s) == 0)


def _pohozaev(N, s, r, J, f, F, scalar=False):
    with np.errstate(divide="ignore", invalid="ignore"):
        P = r ** N * (2 * N * (F / f) * J - r ** 2 * J ** 2 - 2 * F)
    P = np.where(np.abs(f) < F_EXCLUDE, np.nan, P)
    return float(P[0]) if scalar else P


def P_prime_sign(arc, s_range=None, n=200):
    """Check P' > 0 wherever the (H2) margin 2N(F/f)' - (N-2) and J are positive."""
    s = probe_points(arc, s_range, n)
    N = arc.N
    if s.size == 0:
        return SignReport("P' > 0", 0, [], ["no admissible probes"])
    _, J = arc.state(s)
    margin = 2 * N * _F_over_f_prime(arc.nl, s) - (N - 2)
    s = s[(margin > 0) & (J > 0)]
    if s.size == 0:
        return SignReport("P' > 0", 0, [], ["(H2) margin or J not positive on the range"])
    h = fd_steps(arc, s)
    # F/f is singular at the zeros of f; keep the stencil well away from them
    clear = (np.abs(s) > 50 * h) & (np.abs(np.abs(s) - arc.nl.b) > 50 * h)
    notes = [] if np.all(clear) else [f"{int((~clear).sum())} probes skipped near zeros of f"]
    s, h = s[clear], h[clear]
    dP = fd5(lambda x: pohozaev_P(arc, x), s, h)
    return SignReport("P' > 0", int(s.size), list(s[~(dP > 0)]), notes)


def peletier_serrin_W(arc, s):
    """W = r sqrt(2 I); requires I > 0."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    r, _ = arc.state(s_arr)
    energy = energy_I(arc, s=s_arr)
    if np.any(energy <= 0):
        raise NonpositiveEnergy(f"I <= 0 at s = {s_arr[energy <= 0][0]}")
    W = r * np.sqrt(2 * energy)
    return float(W[0]) if np.ndim(s) == 0 else W


def W_prime(arc, s):
    """Closed form W' = ((N-2) r^2 J^2 - 2F) / (r J sqrt(r^2 J^2 + 2F))."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    r, J = arc.state(s_arr)
    F = _vec(arc.nl, "F", s_arr)
    x = r * J
    out = ((arc.N - 2) * x ** 2 - 2 * F) / (x * np.sqrt(x ** 2 + 2 * F))
    return float(out[0]) if np.ndim(s) == 0 else out


def check_W(arc, s_range=None, n=200, tol=1e-5):
    """W^2 = 2 r^2 I on the nodes, and FD W' against its closed form."""
    energy = energy_I(arc, s=arc.s)
    keep = energy > 0
    s = arc.s[keep]
    W = arc.r[keep] * np.sqrt(2 * energy[keep])
    recompute = _residual_report("W^2 = 2r^2 I", s, W ** 2, 2 * arc.r[keep] ** 2 * energy[keep],
                                 np.maximum(2 * arc.r[keep] ** 2 * energy[keep], 1e-300), tol)
    p = probe_points(arc, s_range, n)
    if p.size:
        # W' is singular where I vanishes; keep away from that edge
        r, J = arc.state(p)
        p = p[energy_I(arc, s=p) > W_EDGE * (0.5 * (r * J) ** 2 + np.abs(_vec(arc.nl, "F", p)))]
    if p.size == 0:
        return recompute, _residual_report("W'", p, None, None, None, tol)
    h = fd_steps(arc, p)
    lhs = fd5(lambda x: peletier_serrin_W(arc, x), p, h)
    r, J = arc.state(p)
    F = _vec(arc.nl, "F", p)
    x = r * J
    scale = ((arc.N - 2) * x ** 2 + 2 * np.abs(F)) / np.abs(x * np.sqrt(x ** 2 + 2 * F))
    return recompute, _residual_report("W'", p, lhs, W_prime(arc, p), scale, tol)


def psi_roots(q, N):
    """Roots of q psi^2 - N psi + 1 = 0 with q = f' r^2.

    Returns (psi1, 1/psi2) in cancellation-free form; q = 0 gives
    (1/N, 0).  Raises :class:`NoRealRoots` when q > N^2/4.
    """
    D = N * N - 4.0 * q
    if D < 0:
        raise NoRealRoots(f"f' r^2 = {q} exceeds N^2/4 = {N * N / 4}")
    root = math.sqrt(D)
    return 2.0 / (N + root), 2.0 * q / (N + root)


def psi_bounds(arc, s):
    """(psi1, 1/psi2) at s, from q = f'(s) r(s)^2."""
    r, _ = arc.state(np.atleast_1d(float(s)))
    return psi_roots(arc.nl.df(float(s)) * float(r[0]) ** 2, arc.N)


# ---------------------------------------------------------------------------
# sample tables
# ---------------------------------------------------------------------------

@dataclass
class FunctionalSamples:
    s: np.ndarray
    r: np.ndarray
    J: np.ndarray
    I: np.ndarray
    H: np.ndarray
    P: np.ndarray
    W: np.ndarray
    psi1: np.ndarray
    psi2r: np.ndarray
    F: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    N: int = 3

    def recompute_P(self):
        return _pohozaev(self.N, self.s, self.r, self.J, self.f, self.F)

    def to_csv(self, path):
        cols = ["s", "r", "J", "I", "H", "P", "W", "psi1", "psi2r"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for i in range(self.s.size):
                w.writerow(["" if not np.isfinite(getattr(self, c)[i]) else format(getattr(self, c)[i], ".17g")
                            for c in cols])


def sample_functionals(arc):
    """All functionals on the arc nodes; NaN marks points outside a partial domain."""
    s, r, J, N = arc.s, arc.r, arc.J, arc.N
    F = _vec(arc.nl, "F", s)
    f = _vec(arc.nl, "f", s)
    I = 0.5 * (r * J) ** 2 + F
    H = r ** (2 * (N - 1)) * I
    P = _pohozaev(N, s, r, J, f, F)
    with np.errstate(invalid="ignore"):
        W = np.where(I > 0, r * np.sqrt(np.where(I > 0, 2 * I, 0.0)), np.nan)
    psi1 = np.full(s.size, np.nan)
    psi2r = np.full(s.size, np.nan)
    for i in range(s.size):
        try:
            psi1[i], psi2r[i] = psi_roots(arc.nl.df(float(s[i])) * r[i] ** 2, N)
        except NoRealRoots:
            pass
    return FunctionalSamples(s, r, J, I, H, P, W, psi1, psi2r, F, f, N)


# ---------------------------------------------------------------------------
# phase curve
# ---------------------------------------------------------------------------

@dataclass
class PhaseCurve:
    """The (u, J) curve with J = -u'/r, sampled at the step nodes."""

    u: np.ndarray
    J: np.ndarray
    r: np.ndarray

    @property
    def points(self):
        return np.column_stack([self.u, self.J])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "J", "r"])
            for a, b, c in zip(self.u, self.J, self.r):
                w.writerow([format(a, ".17g"), format(b, ".17g"), format(c, ".17g")])


def phase_curve(traj):
    r, u, du = traj.nodes()
    with np.errstate(divide="ignore", invalid="ignore"):
        J = -du / r
    if r[0] == 0.0:
        J[0] = traj.nl.f(float(u[0])) / traj.params.N
    return PhaseCurve(u, J, r)


@dataclass
class IntersectionReport:
    crossings: int
    pairs: list

    @property
    def passed(self):
        return self.crossings == 0


def self_intersection_check(curve, max_report=10):
    """Count transversal crossings between non-adjacent polyline segments."""
    P = curve.points if isinstance(curve, PhaseCurve) else np.asarray(curve, dtype=float)
    a, b = P[:-1], P[1:]
    n = a.shape[0]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    count, pairs = 0, []
    for i in range(n - 2):
        j = np.arange(i + 2, n)
        box = ((lo[j, 0] <= hi[i, 0]) & (hi[j, 0] >= lo[i, 0])
               & (lo[j, 1] <= hi[i, 1]) & (hi[j, 1] >= lo[i, 1]))
        j = j[box]
        if j.size == 0:
            continue
        d = b[i] - a[i]
        o1 = d[0] * (a[j, 1] - a[i, 1]) - d[1] * (a[j, 0] - a[i, 0])
        o2 = d[0] * (b[j, 1] - a[i, 1]) - d[1] * (b[j, 0] - a[i, 0])
        e = b[j] - a[j]
        o3 = e[:, 0] * (a[i, 1] - a[j, 1]) - e[:, 1] * (a[i, 0] - a[j, 0])
        o4 = e[:, 0] * (b[i, 1] - a[j, 1]) - e[:, 1] * (b[i, 0] - a[j, 0])
        hit = (o1 * o2 < 0) & (o3 * o4 < 0)
        if np.any(hit):
            count += int(hit.sum())
            pairs += [(i, int(k)) for k in j[hit]][: max(0, max_report - len(pairs))]
    return IntersectionReport(count, pairs)


def winding_increments(traj):
    """Angle swept by (u, J) between consecutive zeros and extrema of u.

    Before the first zero the centre is (b, 0); after the k-th zero it is
    ((-1)^k b, 0).  Counterclockwise turning gives positive increments.
    Returns a list of (r_from, r_to, centre, dtheta).
    """
    b = traj.nl.b
    keys = sorted({e.r for e in traj.events if e.kind in (ZERO_OF_U, ZERO_OF_DU)})
    zeros = sorted(e.r for e in traj.events_of(ZERO_OF_U))
    cuts = [traj.r_start] + [k for k in keys if traj.r_start < k < traj.r_end] + [traj.r_end]
    rn, _, _ = traj.nodes()
    out = []
    for ra, rb in zip(cuts, cuts[1:]):
        inner = rn[(rn > ra) & (rn < rb)]
        r = np.concatenate([[ra], inner, [rb]])
        if r.size < 2:
            continue
        u, du = traj.sample(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            J = -du / r
        if r[0] == 0.0:
            J[0] = traj.nl.f(float(u[0])) / traj.params.N
        n_before = sum(1 for z in zeros if z <= ra)
        c = (-1) ** n_before * b
        theta = np.unwrap(np.arctan2(J, u - c))
        out.append((float(ra), float(rb), float(c), float(theta[-1] - theta[0])))
    return out


# ---------------------------------------------------------------------------
# comparison of two solutions
# ---------------------------------------------------------------------------

@dataclass
class ComparisonReport:
    ordered: bool
    degenerate: bool
    first_violation: float | None
    min_gap: float
    s_range: tuple
    n_probes: int
    anchor: float
    anchor_triple: dict

    def to_dict(self):
        return {"ordered": self.ordered, "degenerate": self.degenerate,
                "first_violation": self.first_violation, "min_gap": self.min_gap,
                "s_range": list(self.s_range), "n_probes": self.n_probes,
                "anchor": self.anchor, "anchor_triple": self.anchor_triple}


def compare_solutions(traj_u, traj_v, anchor=None, n=400):
    """Test J_u > J_v on the common range of the first down-arcs.

    The range runs from v's start value down to the first s where I_v < 0
    or to s = 0, whichever comes first.
    """
    au = first_arc(traj_u)
    av = first_arc(traj_v)
    top = min(au.s_hi, av.s_hi)
    bottom = max(au.s_lo, av.s_lo, 0.0)
    if not top > bottom:
        raise NoOverlap(f"common s-range [{bottom}, {top}] is empty")
    s = np.linspace(top, bottom, n)
    Iv = energy_I(av, s=s)
    neg = np.flatnonzero(Iv < 0)
    if neg.size:
        s = s[: neg[0]]
    if s.size == 0:
        raise NoOverlap("I_v < 0 on the whole common range")
    ru, Ju = au.state(s)
    rv, Jv = av.state(s)
    gap = Ju - Jv
    degenerate = bool(np.all(gap == 0.0))
    bad = np.flatnonzero(~(gap > 0))
    first = None if degenerate or bad.size == 0 else float(s[bad[0]])
    anchor = av.s_start if anchor is None else float(anchor)
    (ru_a,), (Ju_a,) = au.state(np.array([anchor]))
    (rv_a,), (Jv_a,) = av.state(np.array([anchor]))
    Pu = pohozaev_P(au, anchor)
    Pv = pohozaev_P(av, anchor)
    triple = {"r_u>r_v": bool(ru_a > rv_a), "J_u>J_v": bool(Ju_a > Jv_a),
              "P_u<0<=P_v": bool(Pu < 0 <= Pv)}
    return ComparisonReport(not degenerate and first is None, degenerate, first,
                            float(gap.min()), (float(s[-1]), float(s[0])), int(s.size), anchor, triple)
