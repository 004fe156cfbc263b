"""Distributions on the real line: point masses, finite discrete laws,
normals and finite mixtures of these.

Every law exposes the right- and left-continuous CDF, the lower quantile,
the lower partial moment ``lpm(z) = E[(z - Y) 1{Y <= z}]`` in closed form,
and ``expect`` for expectations of piecewise-continuous integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np

from .quadrature import integrate

# Standardised half-width of the integration window for normal laws. The
# tail mass beyond 40 standard deviations is below 1e-300.
NORMAL_HALF_WIDTH = 40.0

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)
_STD = NormalDist()


def norm_cdf(x):
    return 0.5 * math.erfc(-x / _SQRT2)


def norm_pdf(x):
    return _INV_SQRT2PI * math.exp(-0.5 * x * x)


class Distribution:
    """Base class; concrete laws are frozen dataclasses below."""

    def cdf(self, y: float, side: str = "right") -> float:
        raise NotImplementedError

    def quantile(self, q: float) -> float:
        raise NotImplementedError

    def lpm(self, z: float) -> float:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def atoms(self) -> list[tuple[float, float]]:
        """Point masses ``(location, mass)`` in increasing order."""
        return []

    def expect(self, f: Callable, jumps: Sequence[float] = (), tol: float = 1e-9) -> float:
        raise NotImplementedError

    @property
    def is_continuous(self) -> bool:
        return not self.atoms()

    def partial_expect(self, f: Callable, upper: float, tol: float = 1e-9) -> float:
        """``E[f(Y) 1{Y <= upper}]``."""
        return self.expect(_indicator_times(f, upper), jumps=(upper,), tol=tol)

    def interval_expect(self, f: Callable, lo: float, hi: float, tol: float = 1e-9) -> float:
        """``E[f(Y) 1{lo < Y <= hi}]`` over the half-open interval ``(lo, hi]``."""
        if hi <= lo:
            return 0.0

        def g(y):
            return _masked(f, y, lambda y: (y > lo) & (y <= hi))

        return self.expect(g, jumps=(lo, hi), tol=tol)

    def has_unique_quantile(self, q: float) -> bool:
        """True unless ``F`` is flat at level ``q`` on a nondegenerate interval."""
        return True


def _masked(f, y, cond):
    y = np.asarray(y, dtype=float)
    mask = cond(y)
    out = np.zeros(y.shape)
    if np.any(mask):
        out[mask] = f(y[mask])
    return out


def _indicator_times(f, upper):
    def g(y):
        return _masked(f, y, lambda y: y <= upper)
    return g


def _eval_atoms(f, locs):
    return np.asarray(f(np.asarray(locs, dtype=float)), dtype=float)


@dataclass(frozen=True)
class PointMass(Distribution):
    c: float

    def cdf(self, y, side="right"):
        if side == "left":
            return 1.0 if self.c < y else 0.0
        return 1.0 if self.c <= y else 0.0

    def quantile(self, q):
        _check_level(q)
        return float(self.c)

    def lpm(self, z):
        return max(z - self.c, 0.0)

    def mean(self):
        return float(self.c)

    def atoms(self):
        return [(float(self.c), 1.0)]

    def expect(self, f, jumps=(), tol=1e-9):
        return float(_eval_atoms(f, [self.c])[0])


@dataclass(frozen=True, init=False)
class Discrete(Distribution):
    """Finite discrete law. Duplicate atoms are merged and weights normalised."""

    support: tuple[float, ...]
    weights: tuple[float, ...]

    def __init__(self, support, weights):
        support = [float(s) for s in support]
        weights = [float(w) for w in weights]
        if len(support) != len(weights) or not support:
            raise ValueError("support and weights must be non-empty and of equal length")
        if any(w <= 0 for w in weights):
            raise ValueError("discrete weights must be positive")
        total = math.fsum(weights)
        if abs(total - 1.0) <= 1e-15:
            total = 1.0  # already normalised; keep the weights bit-stable
        merged: dict[float, float] = {}
        for s, w in zip(support, weights):
            merged[s] = merged.get(s, 0.0) + w / total
        locs = sorted(merged)
        object.__setattr__(self, "support", tuple(locs))
        object.__setattr__(self, "weights", tuple(merged[s] for s in locs))

    def cdf(self, y, side="right"):
        if side == "left":
            return min(1.0, math.fsum(w for s, w in zip(self.support, self.weights) if s < y))
        return min(1.0, math.fsum(w for s, w in zip(self.support, self.weights) if s <= y))

    def quantile(self, q):
        _check_level(q)
        acc = 0.0
        for s, w in zip(self.support, self.weights):
            acc += w
            if acc >= q:
                return s
        return self.support[-1]

    def has_unique_quantile(self, q):
        cum = np.cumsum(self.weights)
        return not np.any(np.abs(cum[:-1] - q) <= 1e-12)

    def lpm(self, z):
        return math.fsum(w * (z - s) for s, w in zip(self.support, self.weights) if s <= z)

    def mean(self):
        return math.fsum(w * s for s, w in zip(self.support, self.weights))

    def atoms(self):
        return list(zip(self.support, self.weights))

    def expect(self, f, jumps=(), tol=1e-9):
        vals = _eval_atoms(f, self.support)
        return math.fsum(vals * np.asarray(self.weights))


@dataclass(frozen=True)
class Normal(Distribution):
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def cdf(self, y, side="right"):
        return norm_cdf((y - self.mu) / self.sigma)

    def quantile(self, q):
        _check_level(q)
        return self.mu + self.sigma * _STD.inv_cdf(q)

    def lpm(self, z):
        a = (z - self.mu) / self.sigma
        return self.sigma * norm_pdf(a) + (z - self.mu) * norm_cdf(a)

    def mean(self):
        return float(self.mu)

    def expect(self, f, jumps=(), tol=1e-9):
        mu, sigma = self.mu, self.sigma

        def g(u):
            dens = np.exp(-0.5 * u * u) * _INV_SQRT2PI
            with np.errstate(over="ignore", invalid="ignore"):
                val = f(mu + sigma * u) * dens
            return np.where(dens > 0.0, val, 0.0)

        cuts = [(j - mu) / sigma for j in jumps]
        # the mass sits near u = 0; seed the panels accordingly
        cuts += [-8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0]
        return integrate(g, -NORMAL_HALF_WIDTH, NORMAL_HALF_WIDTH, breakpoints=cuts, tol=tol)


@dataclass(frozen=True, init=False)
class Mixture(Distribution):
    components: tuple[Distribution, ...]
    weights: tuple[float, ...]

    def __init__(self, components, weights):
        weights = tuple(float(w) for w in weights)
        if len(components) != len(weights) or not components:
            raise ValueError("components and weights must be non-empty and of equal length")
        if any(w < 0 for w in weights):
            raise ValueError("mixture weights must be nonnegative")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        object.__setattr__(self, "components", tuple(components))
        object.__setattr__(self, "weights", weights)

    def _combine(self, values):
        return math.fsum(w * v for w, v in zip(self.weights, values))

    def cdf(self, y, side="right"):
        return min(1.0, self._combine(c.cdf(y, side) for c in self.components))

    def lpm(self, z):
        return self._combine(c.lpm(z) for c in self.components)

    def mean(self):
        return self._combine(c.mean() for c in self.components)

    def atoms(self):
        merged: dict[float, float] = {}
        for comp, w in zip(self.components, self.weights):
            for s, m in comp.atoms():
                merged[s] = merged.get(s, 0.0) + w * m
        return sorted((s, m) for s, m in merged.items() if m > 0)

    def expect(self, f, jumps=(), tol=1e-9):
        return math.fsum(w * c.expect(f, jumps, tol) for w, c in zip(self.weights, self.components) if w > 0)

    def quantile(self, q):
        _check_level(q)
        live = [c for c, w in zip(self.components, self.weights) if w > 0]
        lo = min(c.quantile(min(q, 0.5) * 1e-3) if isinstance(c, Normal) else c.quantile(q) for c in live)
        hi = max(c.quantile(1 - (1 - max(q, 0.5)) * 1e-3) if isinstance(c, Normal) else c.quantile(q) for c in live)
        while self.cdf(lo) >= q:
            lo -= max(1.0, abs(lo))
        while self.cdf(hi) < q:
            hi += max(1.0, abs(hi))
        # invariant: F(lo) < q <= F(hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if not lo < mid < hi:
                break
            if self.cdf(mid) >= q:
                hi = mid
            else:
                lo = mid
        for s, _m in self.atoms():
            if lo < s <= hi:
                return s
        return hi

    def has_unique_quantile(self, q):
        x = self.quantile(q)
        # flat stretch to the right of x at level q
        return not (abs(self.cdf(x) - q) <= 1e-12 and self.cdf(x + 1e-6 * max(1.0, abs(x))) - q <= 1e-12)


def _check_level(q):
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {q!r}")


def point(c: float) -> PointMass:
    return PointMass(float(c))


def normal(mu: float = 0.0, sigma: float = 1.0) -> Normal:
    return Normal(float(mu), float(sigma))


def discrete(support, weights) -> Discrete:
    return Discrete(support, weights)


def mixture(components, weights) -> Mixture:
    return Mixture(components, weights)


def cdf_eval(d: Distribution, y: float, side: str = "right") -> float:
    if side not in ("right", "left"):
        raise ValueError("side must be 'right' or 'left'")
    return d.cdf(y, side)


def quantile(d: Distribution, q: float) -> float:
    return d.quantile(q)


def lpm(d: Distribution, z: float) -> float:
    return d.lpm(z)


def expect(d: Distribution, f: Callable, jumps: Sequence[float] = (), tol: float = 1e-9) -> float:
    return d.expect(f, jumps, tol)


# -- text format ------------------------------------------------------------
#   point:C | normal:MU:SIGMA | discrete:Y1@W1;Y2@W2 | mixture:W1*DIST+W2*DIST

def parse_distribution(text: str) -> Distribution:
    text = text.strip()
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "point":
            return point(float(rest))
        if kind == "normal":
            mu, sigma = rest.split(":")
            return normal(float(mu), float(sigma))
        if kind == "discrete":
            pairs = [item.split("@") for item in rest.split(";") if item.strip()]
            return discrete([float(y) for y, _ in pairs], [float(w) for _, w in pairs])
        if kind == "mixture":
            comps, weights = [], []
            for item in rest.split("+"):
                w, _, sub = item.partition("*")
                weights.append(float(w))
                comps.append(parse_distribution(sub))
            return mixture(comps, weights)
    except (ValueError, TypeError) as exc:
        raise ValueError(f"bad distribution spec {text!r}: {exc}") from None
    raise ValueError(f"unknown distribution kind in {text!r}")


def format_distribution(d: Distribution) -> str:
    if isinstance(d, PointMass):
        return f"point:{d.c!r}"
    if isinstance(d, Normal):
        return f"normal:{d.mu!r}:{d.sigma!r}"
    if isinstance(d, Discrete):
        return "discrete:" + ";".join(f"{s!r}@{w!r}" for s, w in zip(d.support, d.weights))
    if isinstance(d, Mixture):
        return "mixture:" + "+".join(
            f"{w!r}*{format_distribution(c)}" for c, w in zip(d.components, d.weights))
    raise TypeError(type(d))
