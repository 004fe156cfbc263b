"""Scoring functions for the quantile / spectral-ES family.

For levels ``q_m``, weights ``p_m``, increasing functions ``G_1..G_{k-1}``,
a convex function ``Gk`` (written calligraphic G_k in the literature, with
derivative ``G_k``) and an offset ``a``, the score of a forecast ``x`` for
the realisation ``y`` is::

    S(x, y) = sum_r [(1{y<=x_r} - q_r) G_r(x_r) - 1{y<=x_r} G_r(y)]
              + G_k(x_k) [x_k + sum_m (p_m/q_m)((x_m - y) 1{y<=x_m} - q_m x_m)]
              - Gk(x_k) + a(y)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .distributions import Distribution
from .functionals import FunctionalSpec, evaluate_T
from .quadrature import integrate


class ScoreDomainError(ValueError):
    """A catalogue function was evaluated outside its domain."""


@dataclass(frozen=True)
class ScoreFn:
    """A real function with its first two derivatives and convexity flags.

    ``lower``/``upper`` bound the domain; ``open_lower``/``open_upper`` mark
    whether the bound itself is excluded.
    """

    tag: str
    params: tuple[float, ...]
    f: Callable = field(repr=False, compare=False)
    df: Callable = field(repr=False, compare=False)
    d2f: Callable | None = field(default=None, repr=False, compare=False)
    convex: bool = False
    strictly_convex: bool = False
    lower: float = -math.inf
    upper: float = math.inf
    open_lower: bool = True
    open_upper: bool = True

    def _check(self, x):
        arr = np.asarray(x, dtype=float)
        bad = np.isnan(arr)
        bad |= (arr <= self.lower) if self.open_lower else (arr < self.lower)
        bad |= (arr >= self.upper) if self.open_upper else (arr > self.upper)
        if np.any(bad):
            raise ScoreDomainError(f"{self.text()} evaluated outside its domain at {arr[bad].ravel()[:3]}")
        return arr

    def __call__(self, x):
        return self.f(self._check(x))

    def deriv(self, x):
        return self.df(self._check(x))

    def deriv2(self, x):
        if self.d2f is None:
            raise NotImplementedError(f"{self.tag} has no second derivative")
        return self.d2f(self._check(x))

    def in_domain(self, x) -> bool:
        try:
            self._check(x)
        except ScoreDomainError:
            return False
        return True

    @property
    def is_zero(self) -> bool:
        return self.tag == "zero"

    def text(self) -> str:
        if not self.params:
            return self.tag
        return ":".join([self.tag, *(repr(float(p)) for p in self.params)])


def zero() -> ScoreFn:
    return ScoreFn("zero", (), lambda x: np.zeros_like(x, dtype=float),
                   lambda x: np.zeros_like(x, dtype=float),
                   lambda x: np.zeros_like(x, dtype=float), convex=True)


def linear(a: float, b: float = 0.0) -> ScoreFn:
    return ScoreFn("linear", (float(a), float(b)), lambda x: a * x + b,
                   lambda x: np.full_like(x, a, dtype=float),
                   lambda x: np.zeros_like(x, dtype=float), convex=True)


def exp(rate: float = 1.0, scale: float = 1.0) -> ScoreFn:
    """``scale * exp(rate * x)``."""
    return ScoreFn("exp", (float(rate), float(scale)),
                   lambda x: scale * np.exp(rate * x),
                   lambda x: scale * rate * np.exp(rate * x),
                   lambda x: scale * rate * rate * np.exp(rate * x),
                   convex=scale >= 0, strictly_convex=scale > 0 and rate != 0)


def neg_log_neg() -> ScoreFn:
    """``-log(-x)`` on ``x < 0``."""
    return ScoreFn("neg_log_neg", (), lambda x: -np.log(-x), lambda x: -1.0 / x,
                   lambda x: 1.0 / (x * x), convex=True, strictly_convex=True,
                   upper=0.0, open_upper=True)


def power(beta: float) -> ScoreFn:
    """``x ** beta`` on ``x >= 0``; convex for ``beta >= 1``."""
    return ScoreFn("power", (float(beta),), lambda x: np.power(x, beta),
                   lambda x: beta * np.power(x, beta - 1.0),
                   lambda x: beta * (beta - 1.0) * np.power(x, beta - 2.0),
                   convex=beta >= 1.0, strictly_convex=beta > 1.0,
                   lower=0.0, open_lower=False)


def custom(value: Callable, deriv: Callable, deriv2: Callable | None = None,
           convex: bool = False, strictly_convex: bool = False, name: str = "custom") -> ScoreFn:
    """Wrap user-supplied vectorised callables."""
    return ScoreFn(name, (), value, deriv, deriv2, convex=convex, strictly_convex=strictly_convex)


_CATALOGUE = {"zero": zero, "linear": linear, "exp": exp, "neg_log_neg": neg_log_neg, "power": power}


def parse_score_fn(text: str) -> ScoreFn:
    tag, *args = [s.strip() for s in text.strip().split(":")]
    if tag not in _CATALOGUE:
        raise ValueError(f"unknown score function {tag!r}; choose from {sorted(_CATALOGUE)}")
    try:
        return _CATALOGUE[tag](*(float(a) for a in args))
    except TypeError:
        raise ValueError(f"wrong number of parameters in {text!r}") from None


@dataclass(frozen=True)
class ScoreSpec:
    functional: FunctionalSpec
    G: tuple[ScoreFn, ...]
    Gk: ScoreFn
    a: ScoreFn = field(default_factory=zero)
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "G", tuple(self.G))
        if len(self.G) != self.functional.k - 1:
            raise ValueError(f"need {self.functional.k - 1} quantile-component functions")
        if not self.Gk.convex:
            raise ValueError("the last-coordinate function must be convex")

    @property
    def k(self) -> int:
        return self.functional.k

    def in_domain(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return all(g.in_domain(x[r]) for r, g in enumerate(self.G)) and self.Gk.in_domain(x[-1])


def counterexample_cone(alpha: float = 0.05) -> ScoreSpec:
    """``Gk = exp``, ``G_1(s) = exp(-s)/alpha``, ``a = 0``: satisfies the
    monotonicity condition on the cone ``{x_1 >= 0, |x_2| <= x_1}`` yet is not
    consistent there."""
    return ScoreSpec(FunctionalSpec.var_es(alpha), (exp(-1.0, 1.0 / alpha),), exp(),
                     name=f"counterexample_cone({alpha!r})")


def figure1(alpha: float = 0.05) -> ScoreSpec:
    """``G_1 = 0``, ``Gk(x) = -log(-x)`` on ``x < 0``."""
    return ScoreSpec(FunctionalSpec.var_es(alpha), (zero(),), neg_log_neg(),
                     name=f"figure1({alpha!r})")


PRESETS = {"counterexample_cone": counterexample_cone, "figure1": figure1}


def counterexample_formula(x1, x2, y, alpha=0.05):
    """The k = 2 counterexample score written out term by term."""
    ind = 1.0 if y <= x1 else 0.0
    return ((ind - alpha) * math.exp(-x1) / alpha - ind * math.exp(-y) / alpha
            + math.exp(x2) * (x2 + (ind - alpha) * x1 / alpha - ind * y / alpha) - math.exp(x2))


def eval_score(spec: ScoreSpec, x: Sequence[float], y: float) -> float:
    x = np.asarray(x, dtype=float)
    fs = spec.functional
    if x.shape != (fs.k,):
        raise ValueError(f"forecast must have length {fs.k}")
    total = 0.0
    bracket = x[-1]
    for r, (G, q, ratio) in enumerate(zip(spec.G, fs.q, fs.ratios)):
        ind = 1.0 if y <= x[r] else 0.0
        if not G.is_zero:
            total += (ind - q) * float(G(x[r]))
            if ind:
                total -= float(G(y))
        bracket += ratio * ((x[r] - y) * ind - q * x[r])
    total += float(spec.Gk.deriv(x[-1])) * bracket - float(spec.Gk(x[-1]))
    if not spec.a.is_zero:
        total += float(spec.a(y))
    return total


def c_bound(spec: FunctionalSpec, z: Sequence[float], d: Distribution) -> float:
    """``C(z, F) = sum_m (p_m/q_m)(lpm_F(z_m) - q_m z_m)``; ignores ``z_k``."""
    return math.fsum(ratio * (d.lpm(z[m]) - q * z[m])
                     for m, (q, ratio) in enumerate(zip(spec.q, spec.ratios)))


def b_bound(spec: FunctionalSpec, x: Sequence[float], t: Sequence[float]) -> float:
    """``B(x, t) = -t_k + sum_m (p_m/q_m)(t_m - x_m)(q_m - 1{t_m < x_m})``; ignores ``x_k``."""
    terms = [-float(t[-1])]
    for m, (q, ratio) in enumerate(zip(spec.q, spec.ratios)):
        terms.append(ratio * (t[m] - x[m]) * (q - (1.0 if t[m] < x[m] else 0.0)))
    return math.fsum(terms)


def expected_score(spec: ScoreSpec, x: Sequence[float], d: Distribution, tol: float = 1e-9) -> float:
    """``E_F S(x, Y)``, with the indicator jumps at ``x_1..x_{k-1}`` declared
    to the integrator."""
    x = np.asarray(x, dtype=float)
    fs = spec.functional
    terms = []
    for r, (G, q) in enumerate(zip(spec.G, fs.q)):
        if G.is_zero:
            continue
        terms.append((d.cdf(x[r]) - q) * float(G(x[r])))
        terms.append(-d.partial_expect(G, x[r], tol=tol))
    terms.append(float(spec.Gk.deriv(x[-1])) * (x[-1] + c_bound(fs, x, d)))
    terms.append(-float(spec.Gk(x[-1])))
    if not spec.a.is_zero:
        terms.append(d.expect(spec.a, tol=tol))
    return math.fsum(terms)


@dataclass(frozen=True)
class Interval:
    """``(lo, hi]`` when ``closure == "half_open"``, ``[lo, hi]`` when ``"closed"``."""

    lo: float
    hi: float
    closure: str = "closed"

    def __post_init__(self):
        if self.closure not in ("half_open", "closed"):
            raise ValueError("closure must be 'half_open' or 'closed'")
        if self.lo > self.hi:
            raise ValueError("interval endpoints out of order")

    def __contains__(self, v):
        if self.closure == "half_open":
            return self.lo < v <= self.hi
        return self.lo <= v <= self.hi


def I(a: float, b: float) -> Interval:
    return Interval(min(a, b), max(a, b), "half_open")


def Ibar(a: float, b: float) -> Interval:
    return Interval(min(a, b), max(a, b), "closed")


@dataclass(frozen=True)
class ScoreDiffDecomposition:
    r1: float
    r2: float
    w: float

    @property
    def total(self) -> float:
        return self.r1 + self.r2


def score_diff_decomposition(spec: ScoreSpec, z_prime, z, w: float, d: Distribution,
                             tol: float = 1e-9) -> ScoreDiffDecomposition:
    """Split ``E S(z', Y) - E S(z, Y)`` into the quantile part ``r1`` and the
    last-coordinate part ``r2`` around the reference level ``w``."""
    zp = np.asarray(z_prime, dtype=float)
    z = np.asarray(z, dtype=float)
    fs = spec.functional
    Gkw = float(spec.Gk.deriv(w))
    r1 = []
    for r, (G, q, ratio) in enumerate(zip(spec.G, fs.q, fs.ratios)):
        slope = ratio * Gkw

        def g(y, G=G, slope=slope):
            return G(y) + slope * y

        r1.append((d.cdf(zp[r]) - q) * float(g(zp[r])))
        r1.append(-(d.cdf(z[r]) - q) * float(g(z[r])))
        if zp[r] != z[r]:
            span = I(zp[r], z[r])
            r1.append(-math.copysign(1.0, zp[r] - z[r]) * d.interval_expect(g, span.lo, span.hi, tol=tol))
    Gk = spec.Gk
    r2 = [-float(Gk(zp[-1])), float(Gk(z[-1])), Gkw * (zp[-1] - z[-1]),
          (float(Gk.deriv(zp[-1])) - Gkw) * (zp[-1] + c_bound(fs, zp, d)),
          -(float(Gk.deriv(z[-1])) - Gkw) * (z[-1] + c_bound(fs, z, d))]
    return ScoreDiffDecomposition(math.fsum(r1), math.fsum(r2), float(w))


@dataclass(frozen=True)
class MonotoneResult:
    status: str  # "strictly_increasing" | "increasing" | "violated"
    point: float | None = None
    min_slope: float = math.nan

    @property
    def ok(self) -> bool:
        return self.status != "violated"


def monotone_53(spec: ScoreSpec, r: int, w: float, interval: Interval, n: int = 1001) -> MonotoneResult:
    """Classify ``y -> G_r(y) + (p_r/q_r) G_k(w) y`` on ``interval`` from its
    exact derivative on an ``n``-point grid. ``r`` is 0-based."""
    if not (math.isfinite(interval.lo) and math.isfinite(interval.hi)):
        raise ValueError("monotonicity is checked on bounded intervals only")
    fs = spec.functional
    slope = fs.ratios[r] * float(spec.Gk.deriv(w))
    ys = np.linspace(interval.lo, interval.hi, max(n, 2))
    if interval.closure == "half_open":
        ys = ys[1:]
    dG = np.asarray(spec.G[r].deriv(ys), dtype=float)
    deriv = dG + slope
    slack = 1e-12 * max(1.0, float(np.max(np.abs(dG))), abs(slope))
    worst = int(np.argmin(deriv))
    if deriv[worst] < -slack:
        return MonotoneResult("violated", float(ys[worst]), float(deriv[worst]))
    if deriv[worst] <= slack:
        return MonotoneResult("increasing", float(ys[worst]), float(deriv[worst]))
    return MonotoneResult("strictly_increasing", None, float(deriv[worst]))


def _value(fn):
    return fn if not isinstance(fn, ScoreFn) else fn.f


def diagonal_score_diff(g: Sequence[Callable], V: Sequence[Callable], x, z, y: float,
                        tol: float = 1e-12) -> float:
    """``sum_m int_{z_m}^{x_m} g_m(v) V_m(v, y) dv``.

    Each component integrates between its own endpoints ``z_m`` and ``x_m``.
    ``g_m`` and ``V_m`` must be vectorised in ``v``; the jump of ``V_m`` at
    ``v = y`` is declared to the integrator.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    total = []
    for m, (gm, Vm) in enumerate(zip(g, V)):
        gm = _value(gm)
        total.append(integrate(lambda v, gm=gm, Vm=Vm: gm(v) * Vm(v, y), z[m], x[m],
                               breakpoints=(y,), tol=tol, abs_tol=1e-15))
    return math.fsum(total)


def phi_score_diff(phi: Callable, grad_phi: Callable, q: Callable, p: Sequence[Callable],
                   x, z, y: float) -> float:
    """Score difference ``S(x, y) - S(z, y)`` generated by a convex potential.

    Evaluates ``sum_m dphi_m(x)(q(y) x_m - p_m(y)) - phi(x) q(y)`` minus the
    same expression at ``z``.
    """
    qy = float(_value(q)(y))
    py = np.array([float(_value(pm)(y)) for pm in p])

    def half(v):
        v = np.asarray(v, dtype=float)
        grad = np.asarray(grad_phi(v), dtype=float)
        return math.fsum(grad * (qy * v - py)) - float(phi(v)) * qy

    return half(x) - half(z)
