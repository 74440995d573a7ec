"""
Nonlinearities f for the radial problem u'' + (N-1)/r u' + f(u) = 0.

Each model knows how to evaluate f, f' and the primitive F on s >= 0.
:class:`Nonlinearity` wraps a model, applies the odd extension
f(-s) = -f(s) and carries the structural constants b (first positive
zero of f) and beta (positive zero of F).

The piecewise models glue an inner nonlinearity to a large outer
branch through a linear bridge on [alpha1, alpha1 + eps].
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq


class NonlinearityError(ValueError):
    """Base class for invalid nonlinearity configurations."""


class InvalidBreakpoint(NonlinearityError):
    pass


class NoPositivePart(NonlinearityError):
    pass


# ---------------------------------------------------------------------------
# models (all evaluated on s >= 0)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerDifference:
    """f(s) = s**p - s, the model (H1) instance with b = 1."""

    p: float

    def __post_init__(self):
        if not self.p > 1:
            raise NonlinearityError(f"PowerDifference needs p > 1, got {self.p}")

    def f(self, s):
        return s ** self.p - s

    def df(self, s):
        return self.p * s ** (self.p - 1.0) - 1.0

    def F(self, s):
        return s ** (self.p + 1.0) / (self.p + 1.0) - 0.5 * s * s

    @property
    def b(self):
        return 1.0

    def to_dict(self):
        return {"model": "power-diff", "p": self.p}


@dataclass(frozen=True)
class PurePower:
    """f(s) = s**p; b = beta = 0."""

    p: float

    def __post_init__(self):
        if not self.p > 1:
            raise NonlinearityError(f"PurePower needs p > 1, got {self.p}")

    def f(self, s):
        return s ** self.p

    def df(self, s):
        return self.p * s ** (self.p - 1.0)

    def F(self, s):
        return s ** (self.p + 1.0) / (self.p + 1.0)

    @property
    def b(self):
        return 0.0

    def to_dict(self):
        return {"model": "pure-power", "p": self.p}


@dataclass(frozen=True)
class ShiftedPower:
    """f(s) = (s + a)**p, used as the outer branch of the f_a construction.

    Note f(0) = a**p, so on its own this model does not satisfy (H1).
    """

    p: float
    a: float = 0.0

    def __post_init__(self):
        if not self.p > 0:
            raise NonlinearityError(f"ShiftedPower needs p > 0, got {self.p}")
        if self.a < 0:
            raise NonlinearityError(f"ShiftedPower needs a >= 0, got {self.a}")

    def f(self, s):
        return (s + self.a) ** self.p

    def df(self, s):
        return self.p * (s + self.a) ** (self.p - 1.0)

    def F(self, s):
        q = self.p + 1.0
        return ((s + self.a) ** q - self.a ** q) / q

    @property
    def b(self):
        return 0.0

    def to_dict(self):
        return {"model": "shifted-power", "p": self.p, "a": self.a}


class _Piecewise:
    # inner branch on [0, alpha1], linear bridge on (alpha1, alpha1 + eps),
    # outer branch on [alpha1 + eps, inf).  Subclasses define _outer_*.

    def _setup(self):
        if not self.alpha1 > 0:
            raise InvalidBreakpoint(f"alpha1 must be > 0, got {self.alpha1}")
        if not self.eps > 0:
            raise InvalidBreakpoint(f"eps must be > 0, got {self.eps}")
        if not self.lam > 0:
            raise InvalidBreakpoint(f"lam must be > 0, got {self.lam}")
        a1 = self.alpha1
        a2 = self.alpha1 + self.eps
        f_left = self.inner.f(a1)
        f_right = self._outer_f(a2)
        slope = (f_right - f_left) / self.eps
        F_left = self.inner.F(a1)
        F_right = F_left + f_left * self.eps + 0.5 * slope * self.eps ** 2
        object.__setattr__(self, "_a2", a2)
        object.__setattr__(self, "_f_left", f_left)
        object.__setattr__(self, "_slope", slope)
        object.__setattr__(self, "_F_left", F_left)
        object.__setattr__(self, "_F_right", F_right)
        object.__setattr__(self, "_G_right", self._outer_G(a2))

    def f(self, s):
        if s <= self.alpha1:
            return self.inner.f(s)
        if s < self._a2:
            return self._f_left + self._slope * (s - self.alpha1)
        return self._outer_f(s)

    def df(self, s):
        if s <= self.alpha1:
            return self.inner.df(s)
        if s < self._a2:
            return self._slope
        return self._outer_df(s)

    def F(self, s):
        if s <= self.alpha1:
            return self.inner.F(s)
        if s < self._a2:
            t = s - self.alpha1
            return self._F_left + self._f_left * t + 0.5 * self._slope * t * t
        return self._F_right + (self._outer_G(s) - self._G_right)

    def outer(self, s):
        """Outer branch evaluated at ``s`` regardless of the breakpoints."""
        return self._outer_f(s)

    def bridge(self, s):
        """The linear bridge L(s), extended beyond its interval."""
        return self._f_left + self._slope * (s - self.alpha1)

    @property
    def b(self):
        return self.inner.b

    @property
    def kinks(self):
        return (self.alpha1, self._a2)


@dataclass(frozen=True)
class PiecewiseMu(_Piecewise):
    """f_1 below alpha1, bridge, then lam**2 * f_2(s / mu).

    The bridge ends at lam**2 * f_2((alpha1 + eps) / mu) so that the
    assembled function is continuous.
    """

    inner: object
    outer_model: object
    alpha1: float
    eps: float
    lam: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidBreakpoint(f"mu must be > 0, got {self.mu}")
        self._setup()

    def _outer_f(self, s):
        return self.lam ** 2 * self.outer_model.f(s / self.mu)

    def _outer_df(self, s):
        return self.lam ** 2 / self.mu * self.outer_model.df(s / self.mu)

    def _outer_G(self, s):
        # a primitive of the outer branch
        return self.lam ** 2 * self.mu * self.outer_model.F(s / self.mu)

    def to_dict(self):
        return {
            "model": "piecewise-mu",
            "inner": self.inner.to_dict(),
            "outer": self.outer_model.to_dict(),
            "alpha1": self.alpha1,
            "eps": self.eps,
            "lam": self.lam,
            "mu": self.mu,
        }


@dataclass(frozen=True)
class PiecewiseA(_Piecewise):
    """f_1 below alpha1, bridge, then lam**2 * (s + a)**p."""

    inner: object
    alpha1: float
    eps: float
    lam: float
    a: float
    p: float

    def __post_init__(self):
        if self.a < 0:
            raise InvalidBreakpoint(f"shift a must be >= 0, got {self.a}")
        self._setup()

    def _outer_f(self, s):
        return self.lam ** 2 * (s + self.a) ** self.p

    def _outer_df(self, s):
        return self.lam ** 2 * self.p * (s + self.a) ** (self.p - 1.0)

    def _outer_G(self, s):
        return self.lam ** 2 * (s + self.a) ** (self.p + 1.0) / (self.p + 1.0)

    def to_dict(self):
        return {
            "model": "piecewise-a",
            "inner": self.inner.to_dict(),
            "alpha1": self.alpha1,
            "eps": self.eps,
            "lam": self.lam,
            "a": self.a,
            "p": self.p,
        }


def model_from_dict(spec):
    """Build a model from its JSON form, e.g. ``{"model": "power-diff", "p": 3}``."""
    spec = dict(spec)
    kind = spec.pop("model", None)
    try:
        if kind == "power-diff":
            return PowerDifference(float(spec.pop("p")))
        if kind == "pure-power":
            return PurePower(float(spec.pop("p")))
        if kind == "shifted-power":
            return ShiftedPower(float(spec.pop("p")), float(spec.pop("a", 0.0)))
        if kind == "piecewise-mu":
            return PiecewiseMu(
                model_from_dict(spec.pop("inner")),
                model_from_dict(spec.pop("outer")),
                float(spec.pop("alpha1")),
                float(spec.pop("eps")),
                float(spec.pop("lam", 1.0)),
                float(spec.pop("mu", 1.0)),
            )
        if kind == "piecewise-a":
            return PiecewiseA(
                model_from_dict(spec.pop("inner")),
                float(spec.pop("alpha1")),
                float(spec.pop("eps")),
                float(spec.pop("lam")),
                float(spec.pop("a")),
                float(spec.pop("p")),
            )
    except KeyError as exc:
        raise NonlinearityError(f"model {kind!r} is missing field {exc}") from None
    if kind is None:
        raise NonlinearityError("model spec needs a 'model' field")
    raise NonlinearityError(f"unknown model {kind!r}")


def _check_no_extra(spec, allowed):
    extra = set(spec) - set(allowed)
    if extra:
        raise NonlinearityError(f"unknown model fields: {sorted(extra)}")


_ALLOWED_FIELDS = {
    "power-diff": {"model", "p"},
    "pure-power": {"model", "p"},
    "shifted-power": {"model", "p", "a"},
    "piecewise-mu": {"model", "inner", "outer", "alpha1", "eps", "lam", "mu"},
    "piecewise-a": {"model", "inner", "alpha1", "eps", "lam", "a", "p"},
}


def validate_model_dict(spec):
    """Reject unknown fields anywhere in a (possibly nested) model spec."""
    if not isinstance(spec, dict):
        raise NonlinearityError(f"model spec must be an object, got {type(spec).__name__}")
    kind = spec.get("model")
    if kind not in _ALLOWED_FIELDS:
        raise NonlinearityError(f"unknown model {kind!r}")
    _check_no_extra(spec, _ALLOWED_FIELDS[kind])
    for key in ("inner", "outer"):
        if key in spec:
            validate_model_dict(spec[key])


# ---------------------------------------------------------------------------
# the assembled nonlinearity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Nonlinearity:
    """A model plus its odd extension and structural constants.

    Scalar methods ``f``, ``df`` and ``F`` take plain floats; use
    :func:`eval_f` and friends for arrays.
    """

    model: object
    b: float
    beta: float
    kinks: tuple = field(default=())

    def f(self, s):
        if s < 0:
            return -self.model.f(-s)
        return self.model.f(s)

    def df(self, s):
        return self.model.df(-s if s < 0 else s)

    def F(self, s):
        return self.model.F(-s if s < 0 else s)

    def to_dict(self):
        return self.model.to_dict()

    @property
    def hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def make_nonlinearity(model, beta_bound=1e12):
    """Wrap ``model`` and compute b, beta and the kink list."""
    if isinstance(model, dict):
        validate_model_dict(model)
        model = model_from_dict(model)
    b = float(model.b)
    kinks = tuple(getattr(model, "kinks", ()))
    beta = _find_beta(model, b, beta_bound)
    return Nonlinearity(model, b, beta, kinks)


def _vectorize(fun, s):
    if np.ndim(s) == 0:
        return float(fun(float(s)))
    arr = np.asarray(s, dtype=float)
    out = np.fromiter((fun(float(v)) for v in arr.ravel()), dtype=float, count=arr.size)
    return out.reshape(arr.shape)


def eval_f(nl, s):
    """f(s) with the odd extension; accepts scalars or arrays."""
    return _vectorize(nl.f, s)


def eval_df(nl, s):
    """One-sided derivative f'(s) (left branch at alpha1, right at alpha1 + eps)."""
    return _vectorize(nl.df, s)


def eval_F(nl, s):
    """Primitive F(s) = int_0^s f, even in s."""
    return _vectorize(nl.F, s)


def _find_beta(model, b, bound, tol_F=1e-13):
    if b == 0.0:
        # F > 0 for every s > 0 when f > 0 on (0, inf)
        probe = 1e-6
        if model.F(probe) > 0:
            return 0.0
    lo = b
    hi = max(2.0 * b, 1.0)
    while model.F(hi) <= 0:
        lo = hi
        hi *= 2.0
        if hi > bound:
            raise NoPositivePart(f"F stays non-positive up to s = {bound:g}")
    beta = brentq(model.F, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(model.F(beta)) > tol_F * max(1.0, abs(model.f(beta))):
        raise NoPositivePart(f"could not resolve F(beta) = 0 near {beta}")
    return float(beta)


def find_beta(nl):
    """The unique beta >= b with F(beta) = 0 (0 for pure powers)."""
    model = nl.model if isinstance(nl, Nonlinearity) else nl
    return _find_beta(model, float(model.b), 1e12)


def build_fmu(f1, f2, alpha1, eps, lam, mu):
    """Assemble the dilated piecewise nonlinearity f_mu."""
    if not alpha1 > 0 or not eps > 0:
        raise InvalidBreakpoint(f"need alpha1 > 0 and eps > 0, got {alpha1}, {eps}")
    beta1 = find_beta(f1)
    if not alpha1 > beta1:
        raise InvalidBreakpoint(f"alpha1 = {alpha1} must exceed beta(f1) = {beta1}")
    return make_nonlinearity(PiecewiseMu(f1, f2, float(alpha1), float(eps), float(lam), float(mu)))


def build_fa(f1, alpha1, eps, lam, a, p):
    """Assemble f_a with outer branch lam**2 * (s + a)**p."""
    if not alpha1 > 0 or not eps > 0:
        raise InvalidBreakpoint(f"need alpha1 > 0 and eps > 0, got {alpha1}, {eps}")
    beta1 = find_beta(f1)
    if not alpha1 > beta1:
        raise InvalidBreakpoint(f"alpha1 = {alpha1} must exceed beta(f1) = {beta1}")
    return make_nonlinearity(PiecewiseA(f1, float(alpha1), float(eps), float(lam), float(a), float(p)))


# ---------------------------------------------------------------------------
# hypothesis checks (advisory)
# ---------------------------------------------------------------------------

@dataclass
class HypothesisReport:
    h1: bool
    h1_witness: str
    h2: bool
    h2_margin: float
    h3_monotone: bool
    h3_value: float
    h3_value_ok: bool
    notes: list = field(default_factory=list)

    @property
    def h3(self):
        return self.h3_monotone and self.h3_value_ok


def _default_grid(nl, s_max=None, n=400):
    top = s_max if s_max is not None else 10.0 * max(1.0, nl.beta)
    lo = nl.b
    grid = np.linspace(lo, top, n + 1)[1:]
    return grid


def _clean_grid(nl, grid):
    grid = np.asarray(grid, dtype=float)
    keep = np.ones(grid.shape, dtype=bool)
    for k in nl.kinks:
        keep &= np.abs(grid - k) > 1e-9
    fv = eval_f(nl, grid)
    keep &= np.abs(fv) > 1e-12
    return grid[keep]


def check_hypotheses(nl, N, grid=None):
    """Advisory check of (H1)-(H3) on a sample grid.

    ``grid`` is an array of s values in (b, s_max] or a tuple
    ``(s_max, n)``; kinks and zeros of f are dropped from it.
    """
    if isinstance(grid, tuple):
        grid = _default_grid(nl, *grid)
    elif grid is None:
        grid = _default_grid(nl)
    grid = _clean_grid(nl, grid)
    notes = []

    # (H1): sign pattern of f and a unique zero of F
    h1 = True
    witness = "sign pattern ok"
    if nl.f(0.0) != 0.0:
        h1, witness = False, f"f(0) = {nl.f(0.0):.6g}"
    elif nl.b > 0:
        inner = np.linspace(0.0, nl.b, 202)[1:-1]
        if np.any(eval_f(nl, inner) > 0):
            h1, witness = False, "f > 0 somewhere on (0, b)"
    else:
        near0 = np.geomspace(1e-8, 1e-3, 10)
        if not np.any(eval_f(nl, near0) < 0):
            h1, witness = False, "f is not negative near 0+ (b = 0)"
    if h1 and np.any(eval_f(nl, grid) <= 0):
        h1, witness = False, f"f <= 0 at s = {grid[eval_f(nl, grid) <= 0][0]:.6g} > b"

    # (H2): (F/f)' = 1 - F f' / f**2 on s > beta
    crit = (N - 2.0) / (2.0 * N)
    g2 = grid[grid > nl.beta]
    if g2.size:
        fv, dfv, Fv = eval_f(nl, g2), eval_df(nl, g2), eval_F(nl, g2)
        ratio_prime = 1.0 - Fv * dfv / fv ** 2
        margin = float(np.min(ratio_prime - crit))
    else:
        margin = float("nan")
        notes.append("no grid points above beta")
    h2 = bool(margin > 0)

    # (H3): s f'/f decreasing on s > b, and its value at beta
    g3 = grid[grid > nl.b]
    q = g3 * eval_df(nl, g3) / eval_f(nl, g3)
    # non-increasing, so that pure powers (s f'/f = p) pass
    monotone = bool(np.all(np.diff(q) <= 1e-12 * np.abs(q[1:]))) if q.size > 1 else True
    if nl.beta > 0:
        value = nl.beta * nl.df(nl.beta) / nl.f(nl.beta)
    else:
        value = float(q[0]) if q.size else float("nan")
        notes.append("beta = 0; (H3) value taken at the first grid point")
    value_ok = bool(value < N / (N - 2.0))
    return HypothesisReport(h1, witness, h2, margin, monotone, float(value), value_ok, notes)


def critical_exponent(N):
    """The Sobolev exponent (N + 2) / (N - 2)."""
    return (N + 2.0) / (N - 2.0)


def singular_constant(N, p):
    """C(N, p) in the singular solution C r**(-2/(p-1)) of the pure power."""
    m = 2.0 / (p - 1.0)
    return (m * (N - 2.0 - m)) ** (1.0 / (p - 1.0))


def beta_power_difference(p):
    """Closed form beta = ((p+1)/2)**(1/(p-1)) for s**p - s."""
    return ((p + 1.0) / 2.0) ** (1.0 / (p - 1.0))


__all__ = [
    "PowerDifference", "PurePower", "ShiftedPower", "PiecewiseMu", "PiecewiseA",
    "Nonlinearity", "HypothesisReport", "make_nonlinearity", "model_from_dict",
    "validate_model_dict", "eval_f", "eval_df", "eval_F", "find_beta",
    "check_hypotheses", "build_fmu", "build_fa", "critical_exponent",
    "singular_constant", "beta_power_difference", "NonlinearityError",
    "InvalidBreakpoint", "NoPositivePart",
]
