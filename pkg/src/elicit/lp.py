"""Dense two-phase simplex for the tiny linear programs behind domain slicing.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub`` and ``A_eq @ x == b_eq``
with every variable free. Bland's rule keeps it cycle-free; problems here
have at most a few dozen rows, so nothing is sparse or clever.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = 1e-10


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    fun: float = float("nan")


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]
    basis[row] = col


def _run(T, basis, ncols, max_iter):
    """Minimise the objective in the last row of ``T`` over the first ``ncols`` columns."""
    for _ in range(max_iter):
        obj = T[-1, :ncols]
        entering = next((j for j in range(ncols) if obj[j] < -EPS), None)
        if entering is None:
            return "optimal"
        col = T[:-1, entering]
        rhs = T[:-1, -1]
        best, leave = None, None
        for i in np.flatnonzero(col > EPS):
            ratio = rhs[i] / col[i]
            if best is None or ratio < best - EPS or (abs(ratio - best) <= EPS and basis[i] < basis[leave]):
                best, leave = ratio, i
        if leave is None:
            return "unbounded"
        _pivot(T, basis, leave, entering)
    raise RuntimeError("simplex iteration limit reached")


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter=5000) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # columns: x+ (n) | x- (n) | slacks (m_ub) | artificials (m) | rhs
    nv = 2 * n + m_ub
    T = np.zeros((m + 1, nv + m + 1))
    T[:m_ub, :n] = A_ub
    T[:m_ub, n:2 * n] = -A_ub
    T[:m_ub, 2 * n:nv] = np.eye(m_ub)
    T[:m_ub, -1] = b_ub
    T[m_ub:m, :n] = A_eq
    T[m_ub:m, n:2 * n] = -A_eq
    T[m_ub:m, -1] = b_eq
    neg = T[:m, -1] < 0
    T[:m][neg] *= -1.0
    T[:m, nv:nv + m] = np.eye(m)
    basis = list(range(nv, nv + m))

    # phase 1: minimise the sum of artificials
    T[-1, :] = -T[:m].sum(axis=0)
    T[-1, nv:nv + m] = 0.0
    _run(T, basis, nv + m, max_iter)
    if T[-1, -1] < -1e-9 * max(1.0, np.abs(T[:m, -1]).max(initial=0.0)):
        return LPResult("infeasible")
    # drive zero-level artificials out of the basis
    for i, b in enumerate(basis):
        if b >= nv:
            col = next((j for j in range(nv) if abs(T[i, j]) > EPS), None)
            if col is not None:
                _pivot(T, basis, i, col)

    # phase 2
    T[:, nv:nv + m] = 0.0
    for i, b in enumerate(basis):
        if b >= nv:
            T[i, :] = 0.0
    T[-1, :] = 0.0
    T[-1, :n] = c
    T[-1, n:2 * n] = -c
    for i, b in enumerate(basis):
        if b < nv and T[-1, b] != 0.0:
            T[-1] -= T[-1, b] * T[i]
    status = _run(T, basis, nv, max_iter)
    if status == "unbounded":
        return LPResult("unbounded")
    z = np.zeros(nv + m)
    for i, b in enumerate(basis):
        z[b] = T[i, -1]
    x = z[:n] - z[n:2 * n]
    return LPResult("optimal", x, float(c @ x))
