"""The target functional: quantiles at levels q_1 < ... < q_{k-1} plus a
spectral (weighted) Expected Shortfall in the last coordinate.

Lower-tail convention throughout: losses are negative numbers and
``ES_alpha`` is the mean of the distribution below ``VaR_alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import Distribution


@dataclass(frozen=True)
class FunctionalSpec:
    """Quantile levels ``q`` and spectral weights ``p`` (one per level).

    ``k = len(q) + 1``. With ``validate=False`` the weights may be any
    positive numbers; otherwise they must also sum to one.
    """

    q: tuple[float, ...]
    p: tuple[float, ...]
    validate: bool = True

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        if not self.q or len(self.q) != len(self.p):
            raise ValueError("need one weight per quantile level")
        if any(not 0.0 < v < 1.0 for v in self.q):
            raise ValueError("quantile levels must lie in (0, 1)")
        if any(b <= a for a, b in zip(self.q, self.q[1:])):
            raise ValueError("quantile levels must be strictly increasing")
        if any(v <= 0.0 for v in self.p):
            raise ValueError("spectral weights must be positive")
        if self.validate and abs(math.fsum(self.p) - 1.0) > 1e-12:
            raise ValueError("spectral weights must sum to 1 (pass validate=False to skip)")

    @property
    def k(self) -> int:
        return len(self.q) + 1

    @property
    def ratios(self) -> np.ndarray:
        """``p_m / q_m``."""
        return np.asarray(self.p) / np.asarray(self.q)

    @classmethod
    def var_es(cls, alpha: float) -> "FunctionalSpec":
        """The pair ``(VaR_alpha, ES_alpha)``."""
        return cls((alpha,), (1.0,))


def evaluate_T(spec: FunctionalSpec, d: Distribution) -> np.ndarray:
    """Return ``t = (t_1, ..., t_k)`` for the law ``d``."""
    t = np.empty(spec.k)
    terms = []
    for m, (q, p) in enumerate(zip(spec.q, spec.p)):
        t[m] = d.quantile(q)
        terms.append((p / q) * (d.lpm(t[m]) - q * t[m]))
    t[-1] = 0.0 - math.fsum(terms)  # avoid -0.0
    return t


def var_es(alpha: float, d: Distribution) -> tuple[float, float]:
    t = evaluate_T(FunctionalSpec.var_es(alpha), d)
    return float(t[0]), float(t[1])
