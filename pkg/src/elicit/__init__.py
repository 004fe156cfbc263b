"""Consistency diagnostics for quantile and expected-shortfall scoring functions
on restricted action domains."""

from .distributions import (Discrete, Distribution, Mixture, Normal, PointMass, discrete,
                            format_distribution, mixture, normal, parse_distribution, point)
from .functionals import FunctionalSpec, evaluate_T, var_es
from .scores import ScoreFn, ScoreSpec, b_bound, c_bound, eval_score, expected_score
from .domains import Constraint, Domain, certify_domain, construct_path, verify_path
from .consistency import check_consistency, reproduce_counterexample

__version__ = "0.1.0"

__all__ = [
    "Constraint", "Discrete", "Distribution", "Domain", "FunctionalSpec", "Mixture", "Normal",
    "PointMass", "ScoreFn", "ScoreSpec", "b_bound", "c_bound", "certify_domain",
    "check_consistency", "construct_path", "discrete", "eval_score", "evaluate_T",
    "expected_score", "format_distribution", "mixture", "normal", "parse_distribution", "point",
    "reproduce_counterexample", "var_es", "verify_path",
]
