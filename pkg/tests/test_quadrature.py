import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as sp_integrate

from elicit.quadrature import IntegrationError, integrate


def test_polynomial_exact():
    # G7 is exact to degree 13, K15 to degree 22
    assert integrate(lambda x: x**10, -1.0, 2.0) == pytest.approx((2**11 + 1) / 11, rel=1e-14)


def test_gaussian_density():
    f = lambda x: np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    assert integrate(f, -40, 40, tol=1e-12) == pytest.approx(1.0, abs=1e-13)


def test_breakpoint_restores_accuracy():
    step = lambda x: np.where(x <= 0.3, 1.0, -2.0)
    exact = 1.3 - 2 * 0.7
    assert integrate(step, -1, 1, breakpoints=(0.3,), tol=1e-13) == pytest.approx(exact, abs=1e-14)


def test_reversed_bounds_flip_sign():
    f = lambda x: np.cos(x)
    assert integrate(f, 1.0, 0.0) == pytest.approx(-math.sin(1.0), rel=1e-12)


def test_empty_interval():
    assert integrate(lambda x: x, 2.0, 2.0) == 0.0


def test_non_convergence_carries_estimate():
    f = lambda x: 1.0 / np.abs(x - 0.123456)
    with pytest.raises(IntegrationError) as info:
        integrate(f, 0.0, 1.0, tol=1e-14, limit=30)
    assert math.isfinite(info.value.estimate)
    assert info.value.error > 0


@given(a=st.floats(-5, 5), w=st.floats(0.01, 5), c=st.floats(-3, 3))
def test_matches_scipy_quad(a, w, c):
    f = lambda x: np.exp(-c * x) * np.sin(3 * x) ** 2
    ref, _ = sp_integrate.quad(lambda x: math.exp(-c * x) * math.sin(3 * x) ** 2, a, a + w,
                               epsabs=1e-13, epsrel=1e-12, limit=500)
    assert integrate(f, a, a + w, tol=1e-11, abs_tol=1e-14) == pytest.approx(ref, rel=1e-9, abs=1e-12)
