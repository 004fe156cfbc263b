"""Osband-principle diagnostics.

The gradient of a consistent expected score factors as
``grad_x E_F S(x, Y) = h(x) @ Vbar(x, F)`` where ``Vbar`` is the mean of an
identification function and ``h`` does not depend on ``F``. Here ``h`` is
recovered numerically from ``k`` distributions, score differences are
rebuilt by integrating ``h @ V`` along polylines, and ``h`` is scanned for
positive semi-definiteness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .distributions import Distribution, normal
from .functionals import FunctionalSpec
from .quadrature import integrate
from .scores import ScoreSpec, c_bound, expected_score


class RecoveryError(RuntimeError):
    """The k x k system for ``h`` is singular or too ill-conditioned."""


def identification_eval(spec: FunctionalSpec, x, y: float) -> np.ndarray:
    """``V(x, y)``: quantile identifications ``1{y <= x_m} - q_m`` and the
    ES bracket ``x_k + sum_m (p_m/q_m)((x_m - y) 1{y <= x_m} - q_m x_m)``."""
    x = np.asarray(x, dtype=float)
    v = np.empty(spec.k)
    bracket = x[-1]
    for m, (q, ratio) in enumerate(zip(spec.q, spec.ratios)):
        ind = 1.0 if y <= x[m] else 0.0
        v[m] = ind - q
        bracket += ratio * ((x[m] - y) * ind - q * x[m])
    v[-1] = bracket
    return v


def vbar(spec: FunctionalSpec, x, d: Distribution) -> np.ndarray:
    """``E_F V(x, Y)`` in closed form."""
    x = np.asarray(x, dtype=float)
    v = np.empty(spec.k)
    for m, q in enumerate(spec.q):
        v[m] = d.cdf(x[m]) - q
    v[-1] = x[-1] + c_bound(spec, x, d)
    return v


def score_gradient(score: ScoreSpec, x, d: Distribution, fd_step: float = 1e-5,
                   quad_tol: float = 1e-13) -> np.ndarray:
    """Central finite-difference gradient of the expected score."""
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = fd_step
        g[i] = (expected_score(score, x + e, d, quad_tol) - expected_score(score, x - e, d, quad_tol)) / (2 * fd_step)
    return g


@dataclass
class HMatrix:
    x: list[float]
    h: np.ndarray
    cond: float

    @property
    def min_eig(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.h + self.h.T)).min())

    @property
    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.h - self.h.T)))


def probe_family(x, k: int | None = None) -> list[Distribution]:
    """``k`` normal laws placed around ``x`` so that their ``Vbar`` vectors
    at ``x`` are well separated."""
    x = np.asarray(x, dtype=float)
    k = k or x.size
    out = []
    for i in range(k):
        centre = x[0] + (1.5 - 2.0 * i / max(k - 1, 1))
        out.append(normal(centre, 1.0 + 0.5 * i))
    return out


def recover_h(score: ScoreSpec, x, dists: Sequence[Distribution] | None = None,
              fd_step: float = 1e-5, quad_tol: float = 1e-13, max_cond: float = 1e8) -> HMatrix:
    """Solve ``[grad S(x, F_i)]_i = h(x) [Vbar(x, F_i)]_i`` for ``h(x)``."""
    x = np.asarray(x, dtype=float)
    k = score.k
    if dists is None:
        dists = probe_family(x, k)
    if len(dists) != k:
        raise ValueError(f"need exactly {k} distributions")
    Vm = np.column_stack([vbar(score.functional, x, d) for d in dists])
    cond = float(np.linalg.cond(Vm))
    if not math.isfinite(cond) or cond > max_cond:
        raise RecoveryError(f"Vbar matrix at {x.tolist()} has condition number {cond:.3g}")
    Gm = np.column_stack([score_gradient(score, x, d, fd_step, quad_tol) for d in dists])
    h = np.linalg.solve(Vm.T, Gm.T).T
    return HMatrix(x.tolist(), h, cond)


def analytic_h(score: ScoreSpec, x) -> np.ndarray:
    """Closed-form ``h`` for the quantile/ES family: diagonal with entries
    ``G_r'(x_r) + (p_r/q_r) G_k(x_k)`` and ``G_k'(x_k)``. Test oracle."""
    x = np.asarray(x, dtype=float)
    fs = score.functional
    Gk = float(score.Gk.deriv(x[-1]))
    diag = [float(G.deriv(x[r])) + ratio * Gk for r, (G, ratio) in enumerate(zip(score.G, fs.ratios))]
    diag.append(float(score.Gk.deriv2(x[-1])))
    return np.diag(diag)


@dataclass
class PathPolyline:
    vertices: list[np.ndarray]

    def __post_init__(self):
        self.vertices = [np.asarray(v, dtype=float) for v in self.vertices]
        if len(self.vertices) < 2:
            raise ValueError("a polyline needs at least two vertices")

    @property
    def start(self):
        return self.vertices[0]

    @property
    def end(self):
        return self.vertices[-1]

    def segments(self):
        return list(zip(self.vertices[:-1], self.vertices[1:]))


def _line_integral(field_fn: Callable, path: PathPolyline, tol: float, cuts_fn=None) -> float:
    total = []
    for a, b in path.segments():
        delta = b - a
        if not np.any(delta):
            continue

        def integrand(lams, a=a, delta=delta):
            return np.array([float(field_fn(a + lam * delta) @ delta) for lam in np.atleast_1d(lams)])

        cuts = cuts_fn(a, delta) if cuts_fn else ()
        total.append(integrate(integrand, 0.0, 1.0, breakpoints=cuts, tol=tol, abs_tol=1e-13))
    return math.fsum(total)


def path_integral_diff(score: ScoreSpec, path: PathPolyline, d: Distribution,
                       h_source: str | Callable = "recovered", tol: float = 1e-8,
                       dists: Sequence[Distribution] | None = None, fd_step: float = 1e-5) -> float:
    """``E S(end) - E S(start)`` rebuilt as the line integral of ``h @ Vbar``.

    ``h_source`` is ``"recovered"`` (finite differences over ``dists``, or a
    probe family around each node), ``"analytic"`` (closed form for this
    score family) or a callable ``x -> h``.
    """
    fs = score.functional
    h_fn = _h_source(score, h_source, dists, fd_step)
    return _line_integral(lambda x: h_fn(x) @ vbar(fs, x, d), path, tol)


def pointwise_path_diff(score: ScoreSpec, path: PathPolyline, y: float,
                        h_source: str | Callable = "analytic", tol: float = 1e-10,
                        dists: Sequence[Distribution] | None = None, fd_step: float = 1e-5) -> float:
    """``S(end, y) - S(start, y)`` rebuilt from ``h @ V(., y)``; segments are
    split where a quantile coordinate crosses ``y``."""
    fs = score.functional
    h_fn = _h_source(score, h_source, dists, fd_step)

    def cuts(a, delta):
        out = []
        for m in range(fs.k - 1):
            if delta[m] != 0.0:
                lam = (y - a[m]) / delta[m]
                if 0.0 < lam < 1.0:
                    out.append(lam)
        return out

    return _line_integral(lambda x: h_fn(x) @ identification_eval(fs, x, y), path, tol, cuts)


def _h_source(score, h_source, dists, fd_step):
    if callable(h_source):
        return lambda x: np.asarray(h_source(x), dtype=float)
    if h_source == "analytic":
        return lambda x: analytic_h(score, x)
    if h_source == "recovered":
        return lambda x: recover_h(score, x, dists, fd_step).h
    raise ValueError(f"unknown h source {h_source!r}")


@dataclass
class PSDReport:
    points: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    min_eig: float = math.nan
    frac_positive: float = math.nan
    tol: float = 1e-8

    def as_dict(self) -> dict:
        eigs = np.array([p["min_eig"] for p in self.points]) if self.points else np.array([math.nan])
        summary = {q: float(np.quantile(eigs, q)) for q in (0.0, 0.01, 0.5, 0.99, 1.0)} if self.points else {}
        return {"min_eig": self.min_eig, "frac_positive": self.frac_positive, "tol": self.tol,
                "n_points": len(self.points), "n_failures": len(self.failures),
                "quantiles": {str(k): v for k, v in summary.items()},
                "points": self.points, "failures": self.failures}


def psd_scan(score: ScoreSpec, domain, grid: Sequence, dists=None, tol: float = 1e-8,
             fd_step: float = 1e-5) -> PSDReport:
    """Recover ``h`` at each grid point and report the smallest eigenvalue of
    its symmetric part. ``dists`` may be a fixed list or a callable giving a
    family per point; the default places a probe family around each point.
    Points outside the interior of ``domain`` (if given) are skipped."""
    rep = PSDReport(tol=tol)
    for x in grid:
        x = np.asarray(x, dtype=float)
        if domain is not None and not domain.contains(x, "interior"):
            continue
        fam = dists(x) if callable(dists) else dists
        try:
            H = recover_h(score, x, fam, fd_step)
        except (RecoveryError, ValueError, ArithmeticError) as exc:
            rep.failures.append({"x": x.tolist(), "error": str(exc)})
            continue
        rep.points.append({"x": x.tolist(), "min_eig": H.min_eig, "cond": H.cond,
                           "asymmetry": H.asymmetry})
    if rep.points:
        eigs = np.array([p["min_eig"] for p in rep.points])
        rep.min_eig = float(eigs.min())
        rep.frac_positive = float(np.mean(eigs > tol))
    return rep
