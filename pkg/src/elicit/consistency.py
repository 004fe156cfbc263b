"""Numerical consistency checks for quantile/ES scores on an action domain.

``check_consistency`` grids the expected score over ``A``, polishes the
best cell with a compass (pattern) search and compares against the score
at ``T(F)``. The remaining helpers reproduce the cone counterexample, probe
order sensitivity along the last coordinate and emit the data behind the
``-C`` / ``-B`` figure.
"""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distributions import Distribution, format_distribution, normal, point
from .domains import Domain
from .functionals import evaluate_T
from .quadrature import IntegrationError
from .scores import (ScoreDomainError, ScoreSpec, b_bound, c_bound, counterexample_cone,
                     eval_score, expected_score)

log = logging.getLogger(__name__)


def fmt(v) -> str:
    """Twelve significant digits; empty string for missing values."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return format(float(v) + 0.0, ".12g")


@dataclass
class DistRecord:
    dist: str
    t: list[float]
    argmin: list[float] | None
    score_at_t: float
    score_at_argmin: float
    gap: float
    verdict: str  # "consistent" | "inconsistent" | "skipped"
    witness: list[float] | None = None
    witness_score: float | None = None
    failed_points: int = 0
    unique_quantiles: bool = True
    located: bool = True


@dataclass
class ConsistencyReport:
    records: list[DistRecord]
    verdict: str
    strict: bool = False
    witnesses: list[dict] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"verdict": self.verdict, "strict": self.strict, "witnesses": self.witnesses,
                "records": [vars(r) for r in self.records]}


@dataclass(frozen=True)
class SearchConfig:
    resolution: int = 41
    half_width: float = 8.0
    box: tuple | None = None  # ((lo_1, hi_1), ..., (lo_k, hi_k))
    gap_tol: float = 1e-7
    loc_tol: float = 1e-3
    step_tol: float = 1e-6
    quad_tol: float = 1e-11


def _safe_score(score, x, d, tol, A):
    if not A.contains(x) or not score.in_domain(x):
        return math.inf
    try:
        return expected_score(score, x, d, tol)
    except (ScoreDomainError, IntegrationError):
        return math.nan


def _pattern_search(f, x0, step, step_tol, max_iter=20000):
    x = np.asarray(x0, dtype=float)
    fx = f(x)
    k = x.size
    it = 0
    while step > step_tol and it < max_iter:
        improved = False
        for i in range(k):
            for sgn in (1.0, -1.0):
                y = x.copy()
                y[i] += sgn * step
                fy = f(y)
                it += 1
                if fy < fx:
                    x, fx, improved = y, fy, True
                    break
        if not improved:
            step *= 0.5
    return x, fx


def check_consistency(score: ScoreSpec, A: Domain, dists: Sequence[Distribution],
                      config: SearchConfig = SearchConfig(), probes: Sequence = ()) -> ConsistencyReport:
    """Search each ``F`` for a forecast in ``A`` that beats ``T(F)``.

    ``probes`` are extra forecasts scored alongside the grid.
    """
    fs = score.functional
    k = fs.k
    records = []
    witnesses = []
    for d in dists:
        t = evaluate_T(fs, d)
        unique = all(d.has_unique_quantile(q) for q in fs.q)
        name = format_distribution(d)
        if not A.contains(t) or not score.in_domain(t):
            log.warning("T(F) = %s lies outside the domain; skipping %s", t.tolist(), name)
            records.append(DistRecord(name, t.tolist(), None, math.nan, math.nan, math.nan, "skipped",
                                      unique_quantiles=unique))
            continue
        s_t = expected_score(score, t, d, config.quad_tol)
        if config.box is not None:
            axes = [np.linspace(lo, hi, config.resolution) for lo, hi in config.box]
        else:
            axes = [np.linspace(ti - config.half_width, ti + config.half_width, config.resolution) for ti in t]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
        pts = list(grid) + [np.asarray(p, dtype=float) for p in probes]

        failed = 0
        best_x, best_s = t.copy(), s_t
        first_bad = None
        for x in pts:
            s = _safe_score(score, x, d, config.quad_tol, A)
            if math.isnan(s):
                failed += 1
                continue
            if s < s_t - config.gap_tol and first_bad is None:
                first_bad = (x.copy(), s)
            if s < best_s:
                best_x, best_s = x.copy(), s
        if failed:
            log.warning("%d grid points failed to evaluate for %s", failed, name)

        spacing = min(float(ax[1] - ax[0]) for ax in axes) if config.resolution > 1 else 1.0

        def objective(x):
            s = _safe_score(score, x, d, config.quad_tol, A)
            return math.inf if math.isnan(s) else s

        x_star, s_star = _pattern_search(objective, best_x, spacing, config.step_tol)
        gap = s_star - s_t
        located = bool(np.max(np.abs(x_star - t)) <= config.loc_tol)
        # T(F) only has to be *a* minimiser; landing on it matters for strictness
        ok = gap >= -config.gap_tol and first_bad is None
        rec = DistRecord(name, t.tolist(), x_star.tolist(), s_t, s_star, gap,
                         "consistent" if ok else "inconsistent", failed_points=failed,
                         unique_quantiles=unique, located=located)
        if first_bad is not None:
            rec.witness, rec.witness_score = first_bad[0].tolist(), first_bad[1]
        elif gap < -config.gap_tol:
            rec.witness, rec.witness_score = x_star.tolist(), s_star
        if rec.witness is not None:
            witnesses.append({"dist": name, "x": rec.witness, "score": rec.witness_score,
                              "score_at_t": s_t})
        records.append(rec)

    checked = [r for r in records if r.verdict != "skipped"]
    verdict = "consistent" if checked and all(r.verdict == "consistent" for r in checked) else "inconsistent"
    if not checked:
        verdict = "skipped"
    strict = (verdict == "consistent" and score.Gk.strictly_convex
              and all(r.unique_quantiles and r.located for r in checked))
    return ConsistencyReport(records, verdict, strict, witnesses)


@dataclass(frozen=True)
class CounterexampleTable:
    point_at_t: float
    point_at_probe: float
    t_normal: tuple[float, float]
    normal_at_t: float
    normal_at_probe: float

    def rows(self):
        return [("S(0,0,0)", self.point_at_t), ("S(2,-1.8,0)", self.point_at_probe),
                ("T(F)_1", self.t_normal[0]), ("T(F)_2", self.t_normal[1]),
                ("Sbar(T(F),F)", self.normal_at_t), ("Sbar(2,-1.8,F)", self.normal_at_probe)]


def reproduce_counterexample(alpha: float = 0.05, tol: float = 1e-12) -> CounterexampleTable:
    """Scores of the cone counterexample at ``T(F)`` and at ``(2, -1.8)`` for a
    point mass at 0 and for ``N(0.2, 0.1^2)``."""
    score = counterexample_cone(alpha)
    probe = np.array([2.0, -1.8])
    pm = point(0.0)
    t0 = evaluate_T(score.functional, pm)
    nd = normal(0.2, 0.1)
    t = evaluate_T(score.functional, nd)
    return CounterexampleTable(
        eval_score(score, t0, 0.0), eval_score(score, probe, 0.0),
        (float(t[0]), float(t[1])),
        expected_score(score, t, nd, tol), expected_score(score, probe, nd, tol))


@dataclass
class OrderSensitivity:
    ok: bool
    turning_point: float
    curve: list[tuple[float, float]]
    violations: list[float] = field(default_factory=list)


def order_sensitivity_k(score: ScoreSpec, d: Distribution, z, zk_grid: Sequence[float],
                        tol: float = 1e-7, quad_tol: float = 1e-11) -> OrderSensitivity:
    """Expected score along the last coordinate must fall until ``-C(z, F)``
    and rise after it."""
    z = np.asarray(z, dtype=float)
    turn = -c_bound(score.functional, z, d)
    grid = sorted(float(v) for v in zk_grid)
    curve, bad = [], []
    for v in grid:
        x = z.copy()
        x[-1] = v
        curve.append((v, expected_score(score, x, d, quad_tol)))
    for (v0, s0), (v1, s1) in zip(curve, curve[1:]):
        if v1 <= turn and s1 > s0 + tol:
            bad.append(v1)
        elif v0 >= turn and s1 < s0 - tol:
            bad.append(v1)
    return OrderSensitivity(not bad, turn, curve, bad)


@dataclass
class Figure1Data:
    curves_csv: str
    grid_csv: str
    t: list[float]
    meet_value: float


def figure1_grid(score: ScoreSpec, d: Distribution, box=((-4.0, 1.0), (-4.0, -0.05)),
                 resolution: int = 101, quad_tol: float = 1e-10) -> Figure1Data:
    """CSV payloads: the ``-C``/``-B`` curves over ``z_1`` (with ``t_1``
    inserted into the abscissa) and the expected score on the box grid."""
    fs = score.functional
    if fs.k != 2:
        raise ValueError("figure data is defined for k = 2")
    t = evaluate_T(fs, d)
    (x_lo, x_hi), (y_lo, y_hi) = box
    z1s = np.union1d(np.linspace(x_lo, x_hi, resolution), [t[0]])

    out = io.StringIO(newline="")
    out.write("z1,neg_C,neg_B\n")
    meet = math.nan
    for z1 in z1s:
        negC = -c_bound(fs, (z1, 0.0), d)
        negB = -b_bound(fs, (z1, 0.0), t)
        if z1 == t[0]:
            meet = negC
            if abs(negC - negB) > 1e-9 * max(1.0, abs(negC)):
                raise AssertionError("-C and -B must agree at z1 = t1")
        out.write(f"{fmt(z1)},{fmt(negC)},{fmt(negB)}\n")
    curves = out.getvalue()

    out = io.StringIO(newline="")
    out.write("z1,z2,score\n")
    for z1 in np.linspace(x_lo, x_hi, resolution):
        for z2 in np.linspace(y_lo, y_hi, resolution):
            x = np.array([z1, z2])
            s = expected_score(score, x, d, quad_tol) if score.in_domain(x) else None
            out.write(f"{fmt(z1)},{fmt(z2)},{fmt(s)}\n")
    return Figure1Data(curves, out.getvalue(), t.tolist(), meet)
