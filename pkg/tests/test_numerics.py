import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jcasnet.numerics import (DomainError, IntegrationError, Interval, find_root, gamma_inc,
                              gamma_inc_array, integrate)

mp.mp.dps = 40


def _mp_gamma_inc(p, z1, z2):
    return float(mp.quad(lambda x: x ** (p - 1) * mp.e ** (-x), [z1, z2]))


@pytest.mark.parametrize("p,z1,z2", [
    (1.0, 1.0, 2.0), (2.5, 0.0, 3.0), (0.5, 0.1, math.inf), (-1.5, 0.2, 5.0),
    (-3.2, 1e-3, math.inf), (0.0, 0.5, 40.0), (-0.5, 2.0, 2.0001), (7.0, 30.0, 31.0),
    (-2.0, 1e-6, 1e-5), (3.0, 100.0, math.inf),
])
def test_gamma_inc_matches_high_precision(p, z1, z2):
    want = float(mp.gammainc(p, z1, z2)) if p > 0 or z1 > 0 else _mp_gamma_inc(p, z1, z2)
    assert gamma_inc(p, z1, z2) == pytest.approx(want, rel=1e-12, abs=1e-300)


def test_gamma_inc_known_value():
    # e^-1 - e^-2
    assert gamma_inc(1.0, 1.0, 2.0) == pytest.approx(math.exp(-1) - math.exp(-2), rel=1e-15)


def test_gamma_inc_empty_interval_is_zero():
    assert gamma_inc(-2.0, 3.0, 3.0) == 0.0


@pytest.mark.parametrize("args", [(0.5, 2.0, 1.0), (-1.0, 0.0, 1.0), (1.0, -1.0, 2.0), (float("nan"), 1.0, 2.0)])
def test_gamma_inc_domain_errors(args):
    with pytest.raises(DomainError):
        gamma_inc(*args)


@settings(max_examples=60, deadline=None)
@given(p=st.floats(-4.0, 6.0), a=st.floats(1e-3, 20.0), b=st.floats(1e-3, 20.0), c=st.floats(1e-3, 20.0))
def test_gamma_inc_is_additive(p, a, b, c):
    z = sorted([a, b, c])
    whole = gamma_inc(p, z[0], z[2])
    parts = gamma_inc(p, z[0], z[1]) + gamma_inc(p, z[1], z[2])
    assert parts == pytest.approx(whole, rel=1e-11, abs=1e-300)


def test_gamma_inc_array_broadcasts():
    out = gamma_inc_array(np.array([1.0, 2.0]), 0.0, np.array([[1.0], [np.inf]]))
    assert out.shape == (2, 2)
    assert out[1, 1] == pytest.approx(1.0, rel=1e-14)


def test_integrate_finite_and_semi_infinite():
    assert integrate(math.sin, Interval(0.0, math.pi)) == pytest.approx(2.0, rel=1e-12)
    assert integrate(lambda x: math.exp(-x * x), Interval(0.0, math.inf)) == pytest.approx(
        math.sqrt(math.pi) / 2, rel=1e-10)
    assert integrate(lambda x: np.exp(-x), Interval(1.0, math.inf), vectorized=True) == pytest.approx(
        math.exp(-1), rel=1e-10)


def test_integrate_budget_exhaustion_reports_estimate():
    with pytest.raises(IntegrationError) as e:
        integrate(lambda x: math.sin(1.0 / x) / x if x > 0 else 0.0, Interval(0.0, 1.0), tol=1e-14, max_intervals=20)
    assert math.isfinite(e.value.estimate)


def test_find_root_and_bad_bracket():
    assert find_root(lambda x: x * x - 2.0, Interval(0.0, 2.0)) == pytest.approx(math.sqrt(2), rel=1e-13)
    with pytest.raises(ValueError):
        find_root(lambda x: x * x + 1.0, Interval(0.0, 2.0))


@pytest.mark.parametrize("lo,hi", [(-1.0, 1.0), (2.0, 1.0), (float("nan"), 1.0), (math.inf, math.inf)])
def test_interval_validation(lo, hi):
    with pytest.raises(ValueError):
        Interval(lo, hi)
