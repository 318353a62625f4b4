import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jcasnet.numerics import Interval, integrate
from jcasnet.shotnoise import (SectionalMellin, WindowPartition, h_lb, h_ub, lt_bounds, three_point_atoms,
                               three_point_nodes, two_point_atoms, two_point_nodes, uniform_path_gain_windows)


def _uniform_mellin():
    # Lebesgue measure on [0, 1] with g(x) = x: M(k; [a, b]) = (b^k - a^k) / k
    return SectionalMellin(lambda p, A: (A.hi ** p - A.lo ** p) / p, True, g=lambda x: x,
                           bounds=lambda A: (A.lo, A.hi))


def test_two_point_uniform_gives_gauss_legendre_nodes():
    at = two_point_atoms(_uniform_mellin(), Interval(0.0, 1.0))
    assert at.locations == pytest.approx([0.5 - math.sqrt(3) / 6, 0.5 + math.sqrt(3) / 6], abs=1e-12)
    assert at.weights == pytest.approx([0.5, 0.5], abs=1e-12)
    assert at.locations[0] == pytest.approx(0.2113249, abs=5e-8)


def test_three_point_uniform_is_simpson():
    at = three_point_atoms(_uniform_mellin(), Interval(0.0, 1.0))
    assert at.locations == pytest.approx([0.0, 0.5, 1.0], abs=1e-12)
    assert at.weights == pytest.approx([1 / 6, 2 / 3, 1 / 6], abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(1e-3, 1.0), st.floats(0.0, 1.0)), min_size=3, max_size=8))
def test_atoms_reproduce_four_moments(pts):
    w = np.array([p[0] for p in pts])
    x = np.array([p[1] for p in pts])
    if np.ptp(x) < 1e-3:
        return
    m = np.array([np.sum(w * x ** k) for k in range(4)])
    w1, x1, w2, x2 = two_point_nodes(*m)
    z3 = x.max()
    b1, b2, y2, b3 = three_point_nodes(*m, 0.0, z3)
    for ws, xs in (((w1, w2), (x1, x2)), ((b1, b2, b3), (0.0, y2, z3))):
        got = np.array([sum(wi * xi ** k for wi, xi in zip(ws, xs)) for k in range(4)])
        assert got == pytest.approx(m, rel=1e-9, abs=1e-12)


def test_degenerate_section_collapses_to_one_atom():
    w1, x1, w2, x2 = two_point_nodes(2.0, 1.0, 0.5, 0.25)
    assert float(w2) == 0.0 and float(w1) == 2.0 and float(x1) == pytest.approx(0.5)
    zero = two_point_nodes(0.0, 0.0, 0.0, 0.0)
    assert all(float(v) == 0.0 for v in zero)


def test_h_functionals_bracket_concave_integrand():
    M = _uniform_mellin()
    comp = lambda x: 1.0 - 1.0 / (1.0 + np.asarray(x))
    for s in (0.1, 1.0, 10.0, 100.0):
        exact = integrate(lambda x: comp(s * x), Interval(0.0, 1.0), tol=1e-14)
        assert h_ub(s, Interval(0.0, 1.0), comp, M) <= exact + 1e-15
        assert h_lb(s, Interval(0.0, 1.0), comp, M) >= exact - 1e-15


def test_windows_reciprocal_gain_example():
    part = uniform_path_gain_windows(lambda r: r ** -2, 2, 2.0, spacing="reciprocal-gain")
    assert part.boundaries == pytest.approx((1.0, math.sqrt(2.5), 2.0), rel=1e-12)


def test_windows_gain_inverse_example():
    # uniform in r^(1/2) for g = r^-2
    part = uniform_path_gain_windows(lambda r: r ** -2, 2, 2.0)
    mid = ((1.0 + math.sqrt(2.0)) / 2) ** 2
    assert part.boundaries == pytest.approx((1.0, mid, 2.0), rel=1e-12)


@pytest.mark.parametrize("spacing", ["gain-inverse", "reciprocal-gain"])
def test_single_window_partition(spacing):
    part = uniform_path_gain_windows(lambda r: 4.0 * r ** -2, 1, 10.0, spacing)
    assert part.boundaries == pytest.approx((2.0, 10.0))
    ws = list(part)
    assert ws[0] == Interval(0.0, 2.0) and ws[-1].hi == math.inf


@settings(max_examples=20, deadline=None)
@given(K=st.floats(1e-9, 1e-3), a=st.floats(2.0, 4.0), gam=st.floats(0.0, 1e-2), n=st.integers(1, 40),
       d_end=st.floats(50.0, 3000.0), spacing=st.sampled_from(["gain-inverse", "reciprocal-gain"]))
def test_windows_strictly_increasing(K, a, gam, n, d_end, spacing):
    g = lambda r: K * r ** -a * math.exp(-gam * r)
    part = uniform_path_gain_windows(g, n, d_end, spacing)
    b = np.array(part.boundaries)
    assert np.all(np.diff(b) > 0) and b[-1] == d_end and g(b[0]) == pytest.approx(1.0, rel=1e-9)


def test_window_errors():
    with pytest.raises(ValueError):
        uniform_path_gain_windows(lambda r: r ** -2, 0, 2.0)
    with pytest.raises(ValueError):
        uniform_path_gain_windows(lambda r: r ** -2, 4, 0.5)
    with pytest.raises(ValueError):
        WindowPartition((1.0, 1.0))


def _ppp_r4(lam, K, R):
    """Homogeneous PPP outside radius R with g = K r^-4."""
    def func(p, A):
        lo, hi = max(A.lo, R), A.hi
        if not hi > lo:
            return 0.0
        e = 2.0 - 4.0 * (p - 1)
        F = (lambda r: math.log(r)) if e == 0 else (lambda r: r ** e / e)
        top = 0.0 if math.isinf(hi) else F(hi)
        return 2 * math.pi * lam * K ** (p - 1) * (top - F(lo))
    return SectionalMellin(func, False, g=lambda r: min(K * max(r, R) ** -4, 1.0))


@pytest.mark.parametrize("s", [1e-2, 1.0, 30.0, 1e3])
def test_lt_bounds_homogeneous_rayleigh(s):
    lam, K, R = 1e-4, 1e4, 10.0
    M = _ppp_r4(lam, K, R)
    part = uniform_path_gain_windows(lambda r: K * r ** -4, 16, 400.0)
    comp = lambda x: np.asarray(x) / (1.0 + np.asarray(x))
    f = lambda r: comp(s * K * r ** -4) * 2 * math.pi * lam * r
    exact = math.exp(-integrate(f, Interval(R, math.inf), tol=1e-14))
    lb, ub = lt_bounds(s, comp, 1.0, M, part)
    assert 0 < lb <= exact * (1 + 1e-12) and exact <= ub * (1 + 1e-12) <= 1 + 1e-15


@pytest.mark.parametrize("s", [1e-2, 1.0, 30.0, 1e3])
def test_chord_tail_tightens_upper_bound(s):
    lam, K, R = 1e-4, 1e4, 10.0
    M = _ppp_r4(lam, K, R)
    part = uniform_path_gain_windows(lambda r: K * r ** -4, 4, 40.0)
    comp = lambda x: np.asarray(x) / (1.0 + np.asarray(x))
    f = lambda r: comp(s * K * r ** -4) * 2 * math.pi * lam * r
    exact = math.exp(-integrate(f, Interval(R, math.inf), tol=1e-14))
    lb, ub_chord = lt_bounds(s, comp, 1.0, M, part)
    _, ub_drop = lt_bounds(s, comp, 1.0, M, part, tail_upper="drop")
    assert exact <= ub_chord * (1 + 1e-12) and ub_chord < ub_drop
    with pytest.raises(ValueError):
        lt_bounds(s, comp, 1.0, M, part, tail_upper="none")


def test_refinement_never_loosens():
    lam, K, R = 1e-4, 1e4, 10.0
    M = _ppp_r4(lam, K, R)
    comp = lambda x: np.asarray(x) / (1.0 + np.asarray(x))
    coarse = uniform_path_gain_windows(lambda r: K * r ** -4, 1, 400.0)
    fine = uniform_path_gain_windows(lambda r: K * r ** -4, 32, 400.0)
    for s in (0.1, 10.0, 1e3):
        lc, uc = lt_bounds(s, comp, 1.0, M, coarse)
        lf, uf = lt_bounds(s, comp, 1.0, M, fine)
        assert lf >= lc * (1 - 1e-12) and uf <= uc * (1 + 1e-12)


def test_lt_bounds_at_zero_and_negative():
    M = _ppp_r4(1e-4, 1e4, 10.0)
    part = uniform_path_gain_windows(lambda r: 1e4 * r ** -4, 4, 400.0)
    comp = lambda x: np.asarray(x) / (1.0 + np.asarray(x))
    assert lt_bounds(0.0, comp, 1.0, M, part) == (1.0, 1.0)
    with pytest.raises(ValueError):
        lt_bounds(-1.0, comp, 1.0, M, part)
