"""
Integration of the radial initial value problem

    u'' + (N-1)/r u' + f(u) = 0,   u(r0) = alpha,  u'(r0) = dalpha.

A Dormand-Prince 5(4) pair with its 4th order continuous extension is
stepped on the first-order system (u, u').  When r0 = 0 the regular
singular origin is bridged with the series

    u(r) = alpha - f r^2/(2N) + f f' r^4/(8N(N+2)) + O(r^6)

and that polynomial is kept as the first dense-output segment, so a
trajectory covers [0, r_end] without gaps.

Events (zeros of u and u', crossings of +-b, +-beta and the kinks of a
piecewise f, and the first time the energy u'^2/2 + F(u) turns negative)
are located by bisection on the dense polynomials.  At a kink the step is
cut so that no stage straddles the breakpoint.
"""

from __future__ import annotations

import bisect
import csv
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np


class IntegrationError(RuntimeError):
    pass


class OutOfRange(IntegrationError):
    pass


# termination causes
REACHED_RMAX = "ReachedRmax"
DOUBLE_ZERO = "DoubleZero"
TRAPPED = "Trapped"
STEP_FAILURE = "StepFailure"
ZERO_CAP = "ZeroCap"
REACHED_LEVEL = "ReachedLevel"

# event kinds
ZERO_OF_U = "ZeroOfU"
ZERO_OF_DU = "ZeroOfDu"
CROSS_B = "CrossB"
CROSS_BETA = "CrossBeta"
CROSS_KINK = "CrossKink"
TRAP = "NegativeEnergyTrap"
CROSS_LEVEL = "CrossLevel"


@dataclass(frozen=True)
class ProblemParams:
    """Dimension, horizon and tolerances for one integration.

    ``r0_boot=None`` picks 1e-3 * min(1, 1/sqrt(1 + |f'(alpha)|)).
    """

    N: float = 3.0
    r_max: float = 1e3
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9
    tol_u: float = 1e-8
    tol_du: float = 1e-8
    r0_boot: float | None = None
    tol_event: float = 1e-13
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not self.N > 2:
            raise ValueError(f"N must be > 2, got {self.N}")
        for name in ("abs_tol", "rel_tol", "tol_u", "tol_du", "tol_event"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.r0_boot is not None and not 0 < self.r0_boot < self.r_max:
            raise ValueError("need 0 < r0_boot < r_max")
        if not self.r_max > 0:
            raise ValueError("r_max must be > 0")

    def replace(self, **changes):
        data = asdict(self)
        data.update(changes)
        return ProblemParams(**data)


@dataclass(frozen=True)
class InitialCondition:
    r0: float
    alpha: float
    dalpha: float = 0.0

    def __post_init__(self):
        if self.r0 < 0:
            raise ValueError("r0 must be >= 0")
        if self.r0 == 0 and self.dalpha != 0:
            raise ValueError("a start at r0 = 0 forces u'(0) = 0")


@dataclass(frozen=True)
class Event:
    kind: str
    r: float
    u: float
    du: float
    level: float | None = None

    def to_dict(self):
        d = {"kind": self.kind, "r": self.r, "u": self.u, "du": self.du}
        if self.level is not None:
            d["level"] = self.level
        return d


# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_A71, _A73, _A74, _A75, _A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
# continuous extension (Hairer & Wanner, DOPRI5)
_D1 = -12715105075 / 11282082432
_D3 = 87487479700 / 32700410799
_D4 = -10690763975 / 1880347072
_D5 = 701980252875 / 199316789632
_D6 = -1453857185 / 822651844
_D7 = 69997945 / 29380423


def _horner(c, t):
    return c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * c[4])))


def _horner_d(c, t):
    return c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * 4.0 * c[4]))


def _dense_coeffs(y0, y1, h, k1, k3, k4, k5, k6, k7):
    # monomial coefficients in theta in [0, 1] of the 4th order interpolant
    A = y1 - y0
    B = h * k1 - A
    C = A - h * k7 - B
    D = h * (_D1 * k1 + _D3 * k3 + _D4 * k4 + _D5 * k5 + _D6 * k6 + _D7 * k7)
    return (y0, A + B, C + D - B, -(C + 2.0 * D), D)


@dataclass
class Trajectory:
    """Dense numerical solution of the radial IVP.

    ``seg_r`` holds the n+1 segment boundaries and ``coef`` the (n, 2, 5)
    monomial coefficients of (u, u') in the local variable
    theta = (r - seg_r[i]) / h_i.
    """

    seg_r: np.ndarray
    coef: np.ndarray
    events: list
    termination: str
    params: ProblemParams
    ic: InitialCondition
    nl: object = field(repr=False)
    model_hash: str = ""
    message: str = ""
    final: tuple = (math.nan, math.nan)
    starts_trapped: bool = False

    def __post_init__(self):
        self._starts = self.seg_r[:-1].tolist()

    @property
    def r_start(self):
        return float(self.seg_r[0])

    @property
    def r_end(self):
        return float(self.seg_r[-1])

    @property
    def n_segments(self):
        return self.coef.shape[0]

    def events_of(self, kind):
        return [e for e in self.events if e.kind == kind]

    def _locate(self, r):
        if not self.r_start <= r <= self.r_end:
            raise OutOfRange(f"r = {r} outside [{self.r_start}, {self.r_end}]")
        i = bisect.bisect_right(self._starts, r) - 1
        return min(max(i, 0), self.n_segments - 1)

    def __call__(self, r):
        return dense_eval(self, r)

    def second_derivative(self, r):
        """u''(r) from differentiating the dense u' polynomial."""
        r = np.asarray(r, dtype=float)
        idx = np.clip(np.searchsorted(self.seg_r, r, side="right") - 1, 0, self.n_segments - 1)
        h = self.seg_r[idx + 1] - self.seg_r[idx]
        # a trajectory stopped at its start has a single zero-width segment
        h = np.where(h > 0, h, 1.0)
        t = (r - self.seg_r[idx]) / h
        c = self.coef[idx, 1, :]
        return (c[:, 1] + t * (2 * c[:, 2] + t * (3 * c[:, 3] + t * 4 * c[:, 4]))) / h

    def sample(self, r):
        """Vectorized dense evaluation, returns arrays (u, du)."""
        r = np.asarray(r, dtype=float)
        if r.size and (r.min() < self.r_start or r.max() > self.r_end):
            raise OutOfRange("sample radii outside the covered range")
        idx = np.clip(np.searchsorted(self.seg_r, r, side="right") - 1, 0, self.n_segments - 1)
        h = self.seg_r[idx + 1] - self.seg_r[idx]
        # a trajectory stopped at its start has a single zero-width segment
        h = np.where(h > 0, h, 1.0)
        t = (r - self.seg_r[idx]) / h
        out = []
        for comp in (0, 1):
            c = self.coef[idx, comp, :]
            out.append(c[:, 0] + t * (c[:, 1] + t * (c[:, 2] + t * (c[:, 3] + t * c[:, 4]))))
        u, du = out
        at_end = r == self.r_end
        if np.any(at_end):
            u[at_end], du[at_end] = self.final
        return u, du

    def nodes(self):
        """Step endpoints and the stored states there."""
        u = np.append(self.coef[:, 0, 0], self.final[0])
        du = np.append(self.coef[:, 1, 0], self.final[1])
        return self.seg_r.copy(), u, du

    def energy(self, r=None):
        """I = u'^2/2 + F(u) at the nodes (default) or at radii ``r``."""
        if r is None:
            rr, u, du = self.nodes()
        else:
            rr = np.asarray(r, dtype=float)
            u, du = self.sample(rr)
        F = np.array([self.nl.F(float(x)) for x in np.atleast_1d(u)])
        return rr, 0.5 * np.atleast_1d(du) ** 2 + F

    def to_csv(self, path, stride=1):
        rr, u, du = self.nodes()
        F = np.array([self.nl.F(float(x)) for x in u])
        energy = 0.5 * du ** 2 + F
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "u", "du", "I"])
            for i in range(0, rr.size, max(1, int(stride))):
                w.writerow([_fmt(rr[i]), _fmt(u[i]), _fmt(du[i]), _fmt(energy[i])])

    def events_json(self):
        return json.dumps([e.to_dict() for e in self.events])

    @property
    def provenance(self):
        return {"params": asdict(self.params), "ic": asdict(self.ic), "model": self.model_hash}


def _fmt(x):
    return format(float(x), ".17g")


def dense_eval(traj, r):
    """Interpolated (u, u') at radius ``r``; exact at step endpoints."""
    i = traj._locate(r)
    if r == traj.r_end:
        return traj.final
    r0 = traj.seg_r[i]
    h = traj.seg_r[i + 1] - r0
    t = (r - r0) / h
    c = traj.coef[i]
    return float(_horner(c[0], t)), float(_horner(c[1], t))


def default_boot_radius(nl, alpha):
    return 1e-3 * min(1.0, 1.0 / math.sqrt(1.0 + abs(nl.df(alpha))))


def taylor_bootstrap(nl, params, alpha, r=None):
    """Series start at r = r0_boot (or ``r``) from u(0) = alpha, u'(0) = 0.

    Returns (r, u(r), u'(r)).
    """
    N = params.N
    if r is None:
        r = params.r0_boot if params.r0_boot is not None else default_boot_radius(nl, alpha)
    fa = nl.f(alpha)
    dfa = nl.df(alpha)
    c2 = -fa / (2.0 * N)
    c4 = fa * dfa / (8.0 * N * (N + 2.0))
    u = alpha + c2 * r * r + c4 * r ** 4
    du = 2.0 * c2 * r + 4.0 * c4 * r ** 3
    return r, u, du


def _boot_segment(nl, params, alpha, r):
    # the series as a dense segment on [0, r] in theta = s / r
    N = params.N
    fa = nl.f(alpha)
    dfa = nl.df(alpha)
    c2 = -fa / (2.0 * N) * r * r
    c4 = fa * dfa / (8.0 * N * (N + 2.0)) * r ** 4
    cu = (alpha, 0.0, c2, 0.0, c4)
    cv = (0.0, 2.0 * c2 / r, 0.0, 4.0 * c4 / r, 0.0)
    return cu, cv


def _event_levels(nl):
    levels = [(ZERO_OF_U, 0, 0.0), (ZERO_OF_DU, 1, 0.0)]
    if nl.b > 0:
        levels += [(CROSS_B, 0, nl.b), (CROSS_B, 0, -nl.b)]
    if nl.beta > 0 and nl.beta != nl.b:
        levels += [(CROSS_BETA, 0, nl.beta), (CROSS_BETA, 0, -nl.beta)]
    for k in nl.kinks:
        levels += [(CROSS_KINK, 0, k), (CROSS_KINK, 0, -k)]
    return levels


def _bisect_theta(cfun, level, h, tol):
    # bracket [lo, hi] of a sign change of cfun(theta) - level on [0, 1]
    lo, hi = 0.0, 1.0
    glo = cfun(lo) - level
    while (hi - lo) * h > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = cfun(mid) - level
        if gm == 0.0:
            return mid, mid
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return lo, hi


def _root_theta(cfun, level, h, tol):
    lo, hi = _bisect_theta(cfun, level, h, tol)
    return 0.5 * (lo + hi)


def _crossed(g0, g1):
    return (g0 < 0 < g1) or (g0 > 0 > g1) or (g1 == 0.0 and g0 != 0.0)


def _dp_step(rhs_v, r, u, v, k1u, k1v, h):
    k2v = rhs_v(r + _C2 * h, u + h * _A21 * k1u, v + h * _A21 * k1v)
    k2u = v + h * _A21 * k1v
    k3u = v + h * (_A31 * k1v + _A32 * k2v)
    k3v = rhs_v(r + _C3 * h, u + h * (_A31 * k1u + _A32 * k2u), k3u)
    k4u = v + h * (_A41 * k1v + _A42 * k2v + _A43 * k3v)
    k4v = rhs_v(r + _C4 * h, u + h * (_A41 * k1u + _A42 * k2u + _A43 * k3u), k4u)
    k5u = v + h * (_A51 * k1v + _A52 * k2v + _A53 * k3v + _A54 * k4v)
    k5v = rhs_v(r + _C5 * h, u + h * (_A51 * k1u + _A52 * k2u + _A53 * k3u + _A54 * k4u), k5u)
    k6u = v + h * (_A61 * k1v + _A62 * k2v + _A63 * k3v + _A64 * k4v + _A65 * k5v)
    k6v = rhs_v(r + h, u + h * (_A61 * k1u + _A62 * k2u + _A63 * k3u + _A64 * k4u + _A65 * k5u), k6u)
    un = u + h * (_A71 * k1u + _A73 * k3u + _A74 * k4u + _A75 * k5u + _A76 * k6u)
    vn = v + h * (_A71 * k1v + _A73 * k3v + _A74 * k4v + _A75 * k5v + _A76 * k6v)
    k7u, k7v = vn, rhs_v(r + h, un, vn)
    eu = h * (_E1 * k1u + _E3 * k3u + _E4 * k4u + _E5 * k5u + _E6 * k6u + _E7 * k7u)
    ev = h * (_E1 * k1v + _E3 * k3v + _E4 * k4v + _E5 * k5v + _E6 * k6v + _E7 * k7v)
    return un, vn, eu, ev, (k1u, k3u, k4u, k5u, k6u, k7u), (k1v, k3v, k4v, k5v, k6v, k7v)


def integrate(nl, params, ic, *, stop_on_trap=False, max_zeros=None, stop_levels=()):
    """Integrate the radial IVP and return a :class:`Trajectory`.

    stop_on_trap
        Terminate (``Trapped``) once u'^2/2 + F(u) < 0.  The trap event
        is recorded either way, but only when the energy changes sign
        during the run; a start with negative energy is flagged by
        ``Trajectory.starts_trapped`` instead.
    max_zeros
        Terminate (``ZeroCap``) after this many zeros of u.
    stop_levels
        Extra u-levels; integration stops (``ReachedLevel``) when u first
        crosses one of them, recorded as a ``CrossLevel`` event.
    """
    N = params.N
    Nm1 = N - 1.0
    f = nl.f
    F = nl.F
    atol, rtol = params.abs_tol, params.rel_tol
    tol_ev = params.tol_event
    h_min_rel = 1e-14

    seg_r = []
    segs = []
    events = []

    if ic.r0 == 0.0:
        r_b, u, v = taylor_bootstrap(nl, params, ic.alpha)
        seg_r.append(0.0)
        segs.append(_boot_segment(nl, params, ic.alpha, r_b))
        r = r_b
    else:
        r, u, v = float(ic.r0), float(ic.alpha), float(ic.dalpha)

    kink_levels = {k for k in nl.kinks} | {-k for k in nl.kinks}
    # a stop level on a kink is served by the kink event itself
    kink_stops = {float(x) for x in stop_levels if float(x) in kink_levels}
    levels = _event_levels(nl) + [(CROSS_LEVEL, 0, float(x)) for x in stop_levels
                                  if float(x) not in kink_stops]

    def rhs_v(rr, uu, vv):
        return -(Nm1 * vv / rr) - f(uu)

    def energy_at(cu, cv, t):
        uu, vv = _horner(cu, t), _horner(cv, t)
        return 0.5 * vv * vv + F(uu)

    k1u, k1v = v, rhs_v(r, u, v)
    termination = REACHED_RMAX
    message = ""
    trapped = starts_trapped = 0.5 * v * v + F(u) < 0
    n_zeros = 0
    skip_level = None

    sc0 = atol + rtol * max(abs(u), abs(v))
    d0 = math.hypot(u, v) / sc0
    d1 = math.hypot(k1u, k1v) / sc0
    h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6
    h = min(h, 0.1 * max(r, 1e-3), params.r_max - r)

    if trapped and stop_on_trap:
        termination = TRAPPED
    steps = 0
    done = termination != REACHED_RMAX or r >= params.r_max
    while not done:
        if steps >= params.max_steps:
            termination, message = STEP_FAILURE, "max_steps exceeded"
            break
        h = min(h, params.r_max - r)
        # adaptive step
        while True:
            un, vn, eu, ev, ku, kv = _dp_step(rhs_v, r, u, v, k1u, k1v, h)
            su = atol + rtol * max(abs(u), abs(un))
            sv = atol + rtol * max(abs(v), abs(vn))
            err = math.sqrt(0.5 * ((eu / su) ** 2 + (ev / sv) ** 2))
            if not math.isfinite(err):
                err = 1e10
            if err <= 1.0:
                break
            h *= max(0.2, 0.9 * err ** -0.2)
            if h < h_min_rel * max(1.0, r):
                break
        if err > 1.0:
            termination, message = STEP_FAILURE, f"step size underflow at r = {r:.6g}"
            break
        cu = _dense_coeffs(u, un, h, *ku)
        cv = _dense_coeffs(v, vn, h, *kv)

        # cut the step at the first kink it crosses; the shortened step
        # keeps every stage on one side of the breakpoint
        kink = None
        for kind, comp, lev in levels:
            if kind == CROSS_KINK and lev != skip_level and _crossed(u - lev, un - lev):
                th = _root_theta(lambda t: _horner(cu, t), lev, h, tol_ev)
                if kink is None or th < kink[0]:
                    kink = (th, lev)
        forced = kink is not None and kink[0] * h > h_min_rel * max(1.0, r)
        if forced:
            h_free = h
            h = kink[0] * h
            un, vn, eu, ev, ku, kv = _dp_step(rhs_v, r, u, v, k1u, k1v, h)
            cu = _dense_coeffs(u, un, h, *ku)
            cv = _dense_coeffs(v, vn, h, *kv)
        rn = r + h

        step_events = []
        for kind, comp, lev in levels:
            if kind == CROSS_KINK:
                if forced and lev == kink[1]:
                    step_events.append((1.0, Event(CROSS_KINK, rn, un, vn, lev)))
                continue
            c = cu if comp == 0 else cv
            g0 = (u if comp == 0 else v) - lev
            g1 = (un if comp == 0 else vn) - lev
            if not _crossed(g0, g1):
                continue
            th = 1.0 if g1 == 0.0 else _root_theta(lambda t, c=c: _horner(c, t), lev, h, tol_ev)
            lvl = lev if kind in (CROSS_B, CROSS_BETA, CROSS_LEVEL) else None
            step_events.append((th, Event(kind, r + th * h, _horner(cu, th), _horner(cv, th), lvl)))

        stop_here = None
        if not trapped and 0.5 * vn * vn + F(un) < 0:
            # first point of the step with negative energy
            _, th = _bisect_theta(lambda t: energy_at(cu, cv, t), 0.0, h, tol_ev)
            step_events.append((th, Event(TRAP, r + th * h, _horner(cu, th), _horner(cv, th))))
            trapped = True
            if stop_on_trap:
                stop_here = TRAPPED
        step_events.sort(key=lambda te: te[0])

        for th, e in step_events:
            events.append(e)
            if e.kind == CROSS_LEVEL or (e.kind == CROSS_KINK and e.level in kink_stops):
                stop_here = stop_here or REACHED_LEVEL
                if stop_here == REACHED_LEVEL:
                    # cut the step at the crossing: rescale theta -> th * theta
                    scale = th ** np.arange(5)
                    cu, cv = tuple(np.asarray(cu) * scale), tuple(np.asarray(cv) * scale)
                    rn, un, vn = e.r, e.u, e.du
                break
            if e.kind == ZERO_OF_U:
                n_zeros += 1
                if max_zeros is not None and n_zeros >= max_zeros:
                    stop_here = stop_here or ZERO_CAP

        seg_r.append(r)
        segs.append((cu, cv))
        skip_level = kink[1] if forced else None
        r, u, v = rn, un, vn
        k1u, k1v = ku[-1], kv[-1]
        steps += 1

        if abs(u) < params.tol_u and abs(v) < params.tol_du:
            termination = DOUBLE_ZERO
            break
        if stop_here is not None:
            termination = stop_here
            break
        if r >= params.r_max:
            break
        if forced:
            h = h_free
        else:
            h *= 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))

    seg_r.append(r)
    if segs:
        coef = np.array([[cu, cv] for cu, cv in segs], dtype=float)
    else:
        # nothing was stepped: a zero-length constant segment
        coef = np.zeros((1, 2, 5))
        coef[0, 0, 0], coef[0, 1, 0] = u, v
        seg_r = [r, r]
    events.sort(key=lambda e: e.r)
    traj = Trajectory(
        seg_r=np.asarray(seg_r, dtype=float),
        coef=coef,
        events=events,
        termination=termination,
        params=params,
        ic=ic,
        nl=nl,
        model_hash=nl.hash,
        message=message,
        final=(float(u), float(v)),
        starts_trapped=starts_trapped,
    )
    return traj


def shoot(nl, params, alpha, **kwargs):
    """Integrate from the origin with u(0) = alpha, u'(0) = 0."""
    return integrate(nl, params, InitialCondition(0.0, float(alpha), 0.0), **kwargs)


def residual(traj, n=1000):
    """Max of |u'' + (N-1)u'/r + f(u)| / max(1, |f(u)|) on a probe grid."""
    lo = max(traj.r_start, 1e-12)
    r = np.linspace(lo, traj.r_end, n)
    u, du = traj.sample(r)
    d2 = traj.second_derivative(r)
    fu = np.array([traj.nl.f(float(x)) for x in u])
    res = np.abs(d2 + (traj.params.N - 1.0) * du / r + fu) / np.maximum(1.0, np.abs(fu))
    return float(res.max())


def write_events_json(traj, path):
    with open(path, "w") as fh:
        json.dump([e.to_dict() for e in traj.events], fh, indent=1)
