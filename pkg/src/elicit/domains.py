"""Convex polyhedral action domains and path certification.

A forecast ``x`` may only be issued from an action domain ``A``. Whether
the quantile/ES score stays consistent on ``A`` depends on its geometry:
from every ``x`` in ``A`` there must be a staircase of axis-aligned moves
toward ``t = T(F)`` that stays in ``A``, never moves a coordinate past
``t``, raises the last coordinate only below ``-B(z, t)``, and ends where
both ``t_r`` and the current ``z_r`` lie in the slice ``A'_{r, w}`` with
``w = min(t_k, z_k)``. This module builds and checks such staircases.

Coordinates are 0-based: the quantile coordinates are ``0..k-2`` and the
ES coordinate is ``k-1``.
"""

from __future__ import annotations

import functools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .functionals import FunctionalSpec
from .lp import linprog
from .scores import b_bound

log = logging.getLogger(__name__)

STRICT_EPS = 1e-9
MAX_SWEEPS = 64
PROGRESS_WINDOW = 8


@dataclass(frozen=True)
class Constraint:
    """``a @ x <= b`` (or ``<`` when ``strict``)."""

    a: tuple[float, ...]
    b: float
    strict: bool = False

    def holds(self, x, strict_all=False) -> bool:
        v = math.fsum(ai * xi for ai, xi in zip(self.a, x))
        if self.strict or strict_all:
            return v < self.b
        return v <= self.b

    def text(self) -> str:
        rel = "<" if self.strict else "<="
        return " ".join(repr(float(v)) for v in self.a) + f" {rel} {float(self.b)!r}"


def parse_constraint(text: str) -> Constraint:
    """Inverse of :meth:`Constraint.text`, e.g. ``"1 -1 <= 0"``."""
    for rel, strict in (("<=", False), ("<", True)):
        if rel in text:
            lhs, rhs = text.split(rel)
            return Constraint(tuple(float(v) for v in lhs.split()), float(rhs), strict)
    raise ValueError(f"constraint needs '<=' or '<': {text!r}")


@dataclass(frozen=True)
class Domain:
    k: int
    constraints: tuple[Constraint, ...] = ()
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.k < 2:
            raise ValueError("domains need k >= 2")
        for c in self.constraints:
            if len(c.a) != self.k:
                raise ValueError(f"constraint {c.text()!r} does not have {self.k} coefficients")

    def contains(self, x, where: str = "closure_as_declared") -> bool:
        if len(x) != self.k:
            raise ValueError(f"point has dimension {len(x)}, domain has {self.k}")
        strict_all = where == "interior"
        return all(c.holds(x, strict_all) for c in self.constraints)

    def __contains__(self, x) -> bool:
        return self.contains(x)

    def intersect(self, other: "Domain", name: str | None = None) -> "Domain":
        if other.k != self.k:
            raise ValueError("dimension mismatch")
        return Domain(self.k, self.constraints + other.constraints,
                      name or f"{self.name}&{other.name}")

    def coordinate_range(self, z, j):
        """Feasible values of coordinate ``j`` with the others held at ``z``.

        Returns ``(lo, lo_strict, hi, hi_strict)``.
        """
        lo, hi = -math.inf, math.inf
        lo_strict = hi_strict = False
        for c in self.constraints:
            aj = c.a[j]
            if aj == 0.0:
                continue
            rest = c.b - math.fsum(ai * zi for i, (ai, zi) in enumerate(zip(c.a, z)) if i != j)
            bound = rest / aj
            if aj > 0:
                if bound < hi or (bound == hi and c.strict):
                    hi, hi_strict = bound, c.strict
            else:
                if bound > lo or (bound == lo and c.strict):
                    lo, lo_strict = bound, c.strict
        return lo, lo_strict, hi, hi_strict


def _unit(k, i, v=1.0):
    a = [0.0] * k
    a[i] = v
    return a


def full(k: int = 2) -> Domain:
    return Domain(k, (), f"full({k})")


def A0(spec: FunctionalSpec) -> Domain:
    """``{x_1 <= ... <= x_{k-1}, x_k <= sum_m p_m x_m}``."""
    k = spec.k
    cons = []
    for m in range(k - 2):
        a = [0.0] * k
        a[m], a[m + 1] = 1.0, -1.0
        cons.append(Constraint(tuple(a), 0.0))
    a = [-p for p in spec.p] + [1.0]
    cons.append(Constraint(tuple(a), 0.0))
    return Domain(k, tuple(cons), "A0")


def A0_plus(spec: FunctionalSpec) -> Domain:
    k = spec.k
    pos = tuple(Constraint(tuple(_unit(k, i, -1.0)), 0.0) for i in range(k))
    return Domain(k, A0(spec).constraints + pos, "A0_plus")


def A0_minus(spec: FunctionalSpec) -> Domain:
    k = spec.k
    neg = tuple(Constraint(tuple(_unit(k, i)), 0.0) for i in range(k))
    return Domain(k, A0(spec).constraints + neg, "A0_minus")


def half_strip(k: int = 2) -> Domain:
    """``R^{k-1} x (-inf, 0)``."""
    return Domain(k, (Constraint(tuple(_unit(k, k - 1)), 0.0, strict=True),), "half_strip")


def band(c: float) -> Domain:
    """``{x_2 <= x_1 <= x_2 + c}``."""
    return Domain(2, (Constraint((-1.0, 1.0), 0.0), Constraint((1.0, -1.0), float(c))), f"band({c!r})")


def cone_counterexample() -> Domain:
    """``{x_1 >= 0, |x_2| <= x_1}``."""
    return Domain(2, (Constraint((-1.0, 0.0), 0.0), Constraint((-1.0, 1.0), 0.0),
                      Constraint((-1.0, -1.0), 0.0)), "cone_counterexample")


def W_cone(W: float) -> Domain:
    """``{x_2 > W x_1}``."""
    return Domain(2, (Constraint((float(W), -1.0), 0.0, strict=True),), f"W_cone({W!r})")


def preset(name: str, spec: FunctionalSpec) -> Domain:
    """Look up a preset by name, e.g. ``"A0"``, ``"band:1"``, ``"W_cone:0.5"``."""
    tag, _, arg = name.partition(":")
    tag = tag.strip()
    table = {
        "full": lambda: full(spec.k),
        "A0": lambda: A0(spec),
        "A0_plus": lambda: A0_plus(spec),
        "A0_minus": lambda: A0_minus(spec),
        "half_strip": lambda: half_strip(spec.k),
        "A0_neg_last": lambda: A0(spec).intersect(half_strip(spec.k), "A0_neg_last"),
        "band": lambda: band(float(arg)),
        "cone_counterexample": cone_counterexample,
        "cone": cone_counterexample,
        "W_cone": lambda: W_cone(float(arg)),
    }
    if tag not in table:
        raise ValueError(f"unknown domain preset {name!r}; choose from {sorted(table)}")
    if tag in ("band", "W_cone") and not arg:
        raise ValueError(f"preset {tag!r} needs a parameter, e.g. {tag}:1")
    return table[tag]()


# -- slices -----------------------------------------------------------------

@dataclass(frozen=True)
class Section:
    """An interval of reals with per-endpoint openness."""

    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False

    def __contains__(self, v) -> bool:
        above = v > self.lo if self.lo_open else v >= self.lo
        below = v < self.hi if self.hi_open else v <= self.hi
        return above and below

    def text(self) -> str:
        return (("(" if self.lo_open else "[") + f"{self.lo}, {self.hi}" + (")" if self.hi_open else "]"))


def _max_strict_slack(A: Domain, fixed: dict[int, float]) -> float:
    """Largest ``s <= 1`` with every strict constraint holding with slack ``s``."""
    k = A.k
    rows, rhs = [], []
    for c in A.constraints:
        rows.append(list(c.a) + [1.0 if c.strict else 0.0])
        rhs.append(c.b)
    rows.append([0.0] * k + [1.0])
    rhs.append(1.0)
    A_eq = [(_unit(k, i) + [0.0]) for i in fixed]
    b_eq = list(fixed.values())
    res = linprog(_unit(k + 1, k, -1.0), rows, rhs, A_eq, b_eq)
    if res.status != "optimal":
        return -math.inf
    return -res.fun


@functools.lru_cache(maxsize=65536)
def _section(A: Domain, r: int, w: float) -> Section | None:
    k = A.k
    A_ub = [list(c.a) for c in A.constraints] or None
    b_ub = [c.b for c in A.constraints] or None
    A_eq, b_eq = [_unit(k, k - 1)], [w]
    has_strict = any(c.strict for c in A.constraints)
    ends = []
    for sense in (1.0, -1.0):
        res = linprog(_unit(k, r, sense), A_ub, b_ub, A_eq, b_eq)
        if res.status == "infeasible":
            return None
        if res.status == "unbounded":
            ends.append((-sense * math.inf, True))
            continue
        e = sense * res.fun
        is_open = has_strict and _max_strict_slack(A, {r: e, k - 1: w}) <= STRICT_EPS
        ends.append((e, is_open))
    (lo, lo_open), (hi, hi_open) = ends
    if has_strict and _max_strict_slack(A, {k - 1: w}) <= STRICT_EPS:
        return None
    if lo == hi and (lo_open or hi_open):
        return None
    return Section(lo, hi, lo_open, hi_open)


def section_interval(A: Domain, r: int, w: float) -> Section | None:
    """Projection to coordinate ``r`` of the slice ``A ∩ {z_k = w}``; ``None`` if empty."""
    if not 0 <= r < A.k - 1:
        raise ValueError(f"r must index a quantile coordinate (0..{A.k - 2})")
    return _section(A, int(r), float(w))


def condition_end(A: Domain, t, z) -> tuple[bool, list[int]]:
    """Check that ``t_r`` and ``z_r`` share the slice at ``min(t_k, z_k)`` for all ``r``.

    Returns the verdict and the failing coordinates.
    """
    w = min(float(t[-1]), float(z[-1]))
    bad = []
    for r in range(A.k - 1):
        s = section_interval(A, r, w)
        if s is None or t[r] not in s or z[r] not in s:
            bad.append(r)
    return not bad, bad


# -- path construction --------------------------------------------------------

@dataclass
class PathSequence:
    points: list[np.ndarray]

    @property
    def N(self) -> int:
        return len(self.points) - 1


@dataclass
class PathResult:
    ok: bool
    path: PathSequence
    trace: dict = field(default_factory=dict)


def _step_target(A, z, j, target, cap=None):
    """Farthest value of ``z[j]`` toward ``target`` (and not beyond ``cap``)
    keeping ``z`` in ``A``; ``None`` if no move is possible."""
    cur = float(z[j])
    lo, lo_strict, hi, hi_strict = A.coordinate_range(z, j)
    if target > cur:
        goal, limit, strict = target, hi, hi_strict
        if cap is not None and cap < goal:
            goal = cap
        if limit <= goal and strict:
            goal = limit - STRICT_EPS * max(1.0, abs(limit))
        else:
            goal = min(goal, limit)
        if not goal > cur:
            return None
    elif target < cur:
        goal, limit, strict = target, lo, lo_strict
        if limit >= goal and strict:
            goal = limit + STRICT_EPS * max(1.0, abs(limit))
        else:
            goal = max(goal, limit)
        if not goal < cur:
            return None
    else:
        return None
    trial = z.copy()
    for i in range(64):
        trial[j] = goal
        if A.contains(trial):
            return goal
        if i < 4:
            # a face hit exactly can miss by round-off; back off a hair first
            goal = cur + (goal - cur) * (1.0 - 4.0 ** i * 1e-12)
            continue
        goal = 0.5 * (goal + cur)
        if goal == cur:
            return None
    return None


def _active(A, z):
    out = []
    for c in A.constraints:
        v = math.fsum(ai * zi for ai, zi in zip(c.a, z))
        if abs(v - c.b) <= 1e-7 * max(1.0, abs(c.b)):
            out.append(c.text())
    return out


def construct_path(A: Domain, spec: FunctionalSpec, x, t, max_sweeps: int = MAX_SWEEPS) -> PathResult:
    """Greedy staircase from ``x`` toward ``t``.

    Each sweep moves every quantile coordinate as far toward ``t_r`` as
    ``A`` allows, then the last coordinate toward ``t_k`` (upward moves are
    also capped by ``-B(z, t)``). Stops as soon as the end condition holds;
    reports failure when a sweep makes no progress or the sweep budget runs
    out. In the latter case the trace classifies the recent progress (see
    ``_extrapolate``) so that slow but steady staircases can be told apart
    from ones converging short of the goal.
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    k = A.k
    if x.shape != (k,) or t.shape != (k,):
        raise ValueError("x and t must have the domain's dimension")
    if not A.contains(x):
        raise ValueError(f"x={x.tolist()} is not in {A.name}")
    if not A.contains(t):
        raise ValueError(f"t={t.tolist()} is not in {A.name}")
    if not A0(spec).contains(t):
        raise ValueError(f"t={t.tolist()} is not in A0")

    z = x.copy()
    points = [z.copy()]
    raising = x[-1] < t[-1]
    done, bad = condition_end(A, t, z)
    if done:
        return PathResult(True, PathSequence(points), {"sweeps": 0})

    dist = [float(np.abs(z - t).sum())]
    for sweep in range(1, max_sweeps + 1):
        moved = False
        for j in range(k):
            cap = None
            if j == k - 1 and raising:
                cap = -b_bound(spec, z, t)
            new = _step_target(A, z, j, float(t[j]), cap)
            if new is None:
                continue
            z = z.copy()
            z[j] = new
            points.append(z)
            moved = True
            done, bad = condition_end(A, t, z)
            if done:
                return PathResult(True, PathSequence(points), {"sweeps": sweep})
        if not moved:
            break
        dist.append(float(np.abs(z - t).sum()))
    reason = "stalled" if not moved else "sweep budget exhausted"
    trace = {
        "reason": reason,
        "sweeps": sweep,
        "blocking_coordinates": [int(r) for r in bad],
        "last_point": z.tolist(),
        "neg_B": -b_bound(spec, z, t),
        "active_constraints": _active(A, z),
    }
    if moved:
        trace.update(_extrapolate(dist, len(points) - 1))
    return PathResult(False, PathSequence(points), trace)


def _extrapolate(dist, n_steps, window=PROGRESS_WINDOW):
    """Classify the per-sweep decrease of ``|z - t|_1`` over the last sweeps.

    Constant or growing decrements mean the staircase reaches ``t`` after
    finitely many more sweeps; the returned ``estimated_N`` bounds that count
    from above. Geometrically shrinking decrements are extrapolated to their
    limit, and progress is ``"decaying"`` when the limit falls short of ``t``.
    The rate compares the mean decrement of the two halves of the window, so
    a single shortened step does not flip the verdict.
    """
    d = np.asarray(dist[-(2 * window + 1):])
    dec = -np.diff(d)
    left = float(d[-1])
    half = dec.size // 2
    if half < 1:
        return {"progress": "decaying", "estimated_N": None}
    early, late = float(dec[:half].mean()), float(dec[-half:].mean())
    if early <= 0.0 or late <= 0.0:
        return {"progress": "decaying", "estimated_N": None}
    ratio = (late / early) ** (1.0 / (dec.size - half))
    per_sweep = n_steps / (len(dist) - 1)
    if ratio >= 1.0 - 1e-6:
        more = left / late
    else:
        reach = late * ratio / (1.0 - ratio)
        if reach <= left:
            return {"progress": "decaying", "ratio": ratio, "estimated_N": None}
        more = math.log1p(-left * (1.0 - ratio) / (late * ratio)) / math.log(ratio)
    return {"progress": "steady", "ratio": ratio,
            "estimated_N": int(n_steps + math.ceil(more * per_sweep))}


@dataclass
class PathCheck:
    start: bool
    end: bool
    monotone: bool
    single_coordinate: bool
    b_cap: bool
    in_domain: bool
    messages: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all((self.start, self.end, self.monotone, self.single_coordinate, self.b_cap, self.in_domain))

    def as_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "monotone": self.monotone,
                "single_coordinate": self.single_coordinate, "b_cap": self.b_cap,
                "in_domain": self.in_domain, "ok": self.ok, "messages": list(self.messages)}


def verify_path(A: Domain, spec: FunctionalSpec, seq: PathSequence | Sequence, x, t) -> PathCheck:
    """Check a staircase against the four path conditions, independently of
    how it was built."""
    pts = [np.asarray(p, dtype=float) for p in (seq.points if isinstance(seq, PathSequence) else seq)]
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    msgs = []
    if not pts:
        return PathCheck(False, False, False, False, False, False, ["empty sequence"])

    start = bool(np.array_equal(pts[0], x))
    if not start:
        msgs.append("first point differs from x")
    end, bad = condition_end(A, t, pts[-1])
    if not end:
        msgs.append(f"end condition fails for coordinates {bad}")
    in_domain = all(A.contains(p) for p in pts)
    if not in_domain:
        msgs.append("a point leaves the domain")

    monotone = single = cap = True
    raising = x[-1] < t[-1]
    for n in range(1, len(pts)):
        prev, cur = pts[n - 1], pts[n]
        changed = np.flatnonzero(prev != cur)
        if len(changed) > 1:
            single = False
            msgs.append(f"step {n} changes coordinates {changed.tolist()}")
            continue
        if len(changed) == 0:
            continue
        r = int(changed[0])
        if not (t[r] <= cur[r] <= prev[r] or prev[r] <= cur[r] <= t[r]):
            monotone = False
            msgs.append(f"step {n} moves coordinate {r} away from or past t")
        if r == A.k - 1 and raising:
            b_prev, b_cur = b_bound(spec, prev, t), b_bound(spec, cur, t)
            if not (prev[r] < cur[r] <= -b_cur and b_cur == b_prev):
                cap = False
                msgs.append(f"step {n} raises the last coordinate above -B")
    return PathCheck(start, end, monotone, single, cap, in_domain, msgs)


# -- certification ------------------------------------------------------------

@dataclass
class CertReport:
    domain: str
    verdict: str  # "holds" | "fails" | "vacuous"
    samples: int
    x_acceptance: float
    t_acceptance: float
    max_N: int = 0
    n_needing_steps: int = 0
    witnesses: list[dict] = field(default_factory=list)
    note: str = "t sampled from A ∩ A0"
    n_extrapolated: int = 0
    max_N_estimated: int = 0

    def as_dict(self) -> dict:
        return {"domain": self.domain, "verdict": self.verdict, "note": self.note,
                "samples": self.samples, "x_acceptance": self.x_acceptance,
                "t_acceptance": self.t_acceptance, "max_N": self.max_N,
                "n_needing_steps": self.n_needing_steps, "n_extrapolated": self.n_extrapolated,
                "max_N_estimated": self.max_N_estimated, "witnesses": self.witnesses}


def _rejection_sample(rng, dom, lo, hi, n, max_proposals, boundary_frac=0.0, depth=(1e-4, 1.0)):
    """Uniform proposals from ``box ∩ dom``; a ``boundary_frac`` share is then
    pulled toward a random face, with log-uniform relative depth in ``depth``."""
    out, tried = [], 0
    faces = [c for c in dom.constraints if any(c.a)]
    while len(out) < n and tried < max_proposals:
        p = rng.uniform(lo, hi, size=dom.k)
        tried += 1
        if not dom.contains(p):
            continue
        if faces and rng.random() < boundary_frac:
            c = faces[rng.integers(len(faces))]
            a = np.asarray(c.a)
            gap = (c.b - a @ p) / (a @ a)
            keep = 10.0 ** rng.uniform(math.log10(depth[0]), math.log10(depth[1]))
            q = p + (1.0 - keep) * gap * a
            if dom.contains(q) and np.all((q >= lo) & (q <= hi)):
                p = q
        out.append(p)
    return out, tried


def certify_domain(A: Domain, spec: FunctionalSpec, n: int = 500, box=(-10.0, 10.0), seed: int = 0,
                   extra_pairs: Sequence = (), max_sweeps: int = MAX_SWEEPS, workers: int = 1,
                   max_witnesses: int = 20, boundary_frac: float = 0.75,
                   extrapolate: bool = True) -> CertReport:
    """Sample ``n`` pairs ``x ∈ A``, ``t ∈ A ∩ A0`` from ``box`` and try to
    build a staircase for each (plus any ``extra_pairs``).

    A ``boundary_frac`` share of the proposals is pushed toward a face of
    their domain: staircases are longest when ``t`` sits close to the
    boundary, which uniform sampling rarely visits.

    A pair whose staircase is still making steady progress when the sweep
    budget runs out does not count against ``A``; it is tallied in
    ``n_extrapolated`` with an upper estimate of its length. With
    ``extrapolate=False`` every unfinished staircase is a failure.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    lo, hi = box
    a0 = A0(spec)
    budget = 200 * n
    xs, x_tried = _rejection_sample(rng, A, lo, hi, n, budget, boundary_frac)
    ts, t_tried = _rejection_sample(rng, A.intersect(a0), lo, hi, n, budget, boundary_frac)
    x_rate = len(xs) / max(x_tried, 1)
    t_rate = len(ts) / max(t_tried, 1)
    for label, rate in (("x", x_rate), ("t", t_rate)):
        if 0 < rate < 0.1:
            log.warning("only %.1f%% of %s proposals landed in %s", 100 * rate, label, A.name)

    pairs = [(np.asarray(x, float), np.asarray(t, float)) for x, t in extra_pairs]
    if not ts:
        if not pairs:
            return CertReport(A.name, "vacuous", 0, x_rate, 0.0)
    else:
        m = min(len(xs), len(ts))
        pairs += list(zip(xs[:m], ts[:m]))

    def run(pair):
        x, t = pair
        return x, t, construct_path(A, spec, x, t, max_sweeps)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, pairs))
    else:
        results = [run(p) for p in pairs]

    n_extra = len(extra_pairs)
    failures, max_N, stepped = [], 0, 0
    n_est, max_est = 0, 0
    for i, (x, t, res) in enumerate(results):
        if res.ok:
            max_N = max(max_N, res.path.N)
            stepped += res.path.N > 0
        elif extrapolate and res.trace.get("progress") == "steady":
            n_est += 1
            stepped += 1
            max_est = max(max_est, res.trace["estimated_N"])
        else:
            failures.append({"x": x.tolist(), "t": t.tolist(), "trace": res.trace,
                             "supplied": i < n_extra})
    # caller-supplied pairs first, then sampled ones in a canonical order
    failures.sort(key=lambda w: (not w["supplied"], w["x"], w["t"]))
    witnesses = failures[:max_witnesses]
    if not failures:
        # record the longest successful staircase for inspection
        longest = max(results, key=lambda r: r[2].path.N)
        witnesses = [{"x": longest[0].tolist(), "t": longest[1].tolist(),
                      "path": [p.tolist() for p in longest[2].path.points]}]
    return CertReport(A.name, "fails" if failures else "holds", len(pairs), x_rate, t_rate,
                      max_N, stepped, witnesses, n_extrapolated=n_est, max_N_estimated=max_est)


def expected_w_verdict(alpha: float, W: float) -> str:
    """Known outcome of the path condition on ``{x_2 > W x_1}`` for ``(VaR_alpha, ES_alpha)``."""
    edge = (alpha - 1.0) / alpha
    if math.isclose(W, edge, rel_tol=1e-12):
        return "fails"
    if W > 1:
        return "holds"
    if W == 1:
        return "vacuous"
    if 0 < W < 1:
        return "fails"
    if W == 0:
        return "holds"
    if edge <= W < 0:
        return "fails"
    return "holds"


def w_sweep(alpha: float, Ws: Sequence[float], n: int = 200, seed: int = 0, **kw) -> list[dict]:
    """Certify ``W_cone(W)`` for each ``W`` and compare with the known buckets."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    spec = FunctionalSpec.var_es(alpha)
    rows = []
    for W in Ws:
        rep = certify_domain(W_cone(W), spec, n=n, seed=seed, **kw)
        expected = expected_w_verdict(alpha, W)
        rows.append({"W": float(W), "verdict": rep.verdict, "expected": expected,
                     "agrees": rep.verdict == expected, "max_N": rep.max_N})
    return rows
