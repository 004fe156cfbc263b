import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as sp_integrate
from scipy import stats

from elicit.distributions import discrete, normal, point
from elicit.domains import A0
from elicit.functionals import FunctionalSpec, evaluate_T, var_es

from strategies import distributions


VAR_ES = FunctionalSpec.var_es(0.05)


def test_point_mass_gives_origin():
    t = evaluate_T(VAR_ES, point(0.0))
    assert t.tolist() == [0.0, 0.0]
    assert not np.signbit(t).any()


def test_counterexample_normal():
    t1, t2 = var_es(0.05, normal(0.2, 0.1))
    assert t1 == pytest.approx(0.0355, abs=5e-5)
    assert t2 == pytest.approx(-0.0063, abs=5e-5)


def test_standard_normal():
    t1, t2 = var_es(0.05, normal())
    assert (round(t1, 2), round(t2, 2)) == (-1.64, -2.06)
    # closed form: ES = mu - sigma * phi(z_alpha) / alpha
    assert t2 == pytest.approx(-stats.norm.pdf(stats.norm.ppf(0.05)) / 0.05, rel=1e-12)


def test_discrete_by_hand():
    d = discrete([-3.0, -1.0, 2.0], [0.1, 0.2, 0.7])
    # VaR_0.2 = -1; ES_0.2 = (0.1 * -3 + 0.1 * -1) / 0.2 = -2
    assert evaluate_T(FunctionalSpec.var_es(0.2), d) == pytest.approx([-1.0, -2.0])


def test_spectral_two_levels():
    spec = FunctionalSpec((0.025, 0.05), (0.5, 0.5))
    t = evaluate_T(spec, normal())
    es = [-stats.norm.pdf(stats.norm.ppf(a)) / a for a in (0.025, 0.05)]
    assert t[:2] == pytest.approx([stats.norm.ppf(0.025), stats.norm.ppf(0.05)], abs=1e-10)
    assert t[2] == pytest.approx(0.5 * es[0] + 0.5 * es[1], rel=1e-10)


@pytest.mark.parametrize("q,p", [((0.05,), (0.5,)), ((0.1, 0.05), (0.5, 0.5)), ((0.0,), (1.0,)),
                                 ((0.5,), (-1.0,)), ((0.1, 0.2), (1.0,))])
def test_rejects_bad_specs(q, p):
    with pytest.raises(ValueError):
        FunctionalSpec(q, p)


def test_validation_can_be_disabled():
    assert FunctionalSpec((0.05,), (2.0,), validate=False).k == 2


@given(d=distributions, alpha=st.floats(0.01, 0.5))
def test_T_lies_in_A0(d, alpha):
    spec = FunctionalSpec.var_es(alpha)
    assert A0(spec).contains(evaluate_T(spec, d) - np.array([0.0, 1e-12]))


@given(mu=st.floats(-3, 3), sigma=st.floats(0.1, 3), alpha=st.floats(0.01, 0.5))
def test_es_matches_tail_mean(mu, sigma, alpha):
    spec = FunctionalSpec.var_es(alpha)
    t1, t2 = evaluate_T(spec, normal(mu, sigma))
    tail, _ = sp_integrate.quad(lambda y: y * stats.norm.pdf(y, mu, sigma), -np.inf, t1,
                                epsabs=1e-13, epsrel=1e-12)
    assert t2 == pytest.approx(tail / alpha, abs=1e-7)


@given(mu=st.floats(-3, 3), sigma=st.floats(0.1, 3), c=st.floats(-5, 5))
def test_location_equivariance(mu, sigma, c):
    spec = FunctionalSpec((0.025, 0.1), (0.3, 0.7))
    base = evaluate_T(spec, normal(mu, sigma))
    shifted = evaluate_T(spec, normal(mu + c, sigma))
    np.testing.assert_allclose(shifted, base + c, atol=1e-9)
