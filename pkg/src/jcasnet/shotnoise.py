"""Closed-form bracketing of Laplace transforms of Poisson shot noise.

For a Poisson process on the half line with intensity measure ``Lambda`` and
marks ``F``, the Laplace transform of ``sum F_i g(r_i)`` is
``exp(-int (1 - L_F(s g(r))) Lambda(dr))``.  The integrand, viewed as a
function of the path gain ``x = g(r)``, has a non-positive fourth derivative,
so moment-matched atomic measures give one-sided estimates of the integral:
the two-node Gauss rule over-estimates it and the endpoint-anchored
three-node rule under-estimates it.  Both need only the sectional Mellin
moments ``M(k; A) = int_A g(r)^(k-1) Lambda(dr)`` for ``k = 1..4``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .numerics import Interval, find_root

CompLF = Callable[[np.ndarray], np.ndarray]


@dataclass
class SectionalMellin:
    """Mellin moments of the path gain against an intensity measure.

    ``func(p, A)`` returns ``int_A g(r)^(p-1) Lambda(dr)``.  ``bounds(A)``
    returns ``(inf g, sup g)`` over ``A``; if it is omitted, ``g`` must be
    supplied and is assumed non-increasing, so the extremes sit at the window
    ends.
    """

    func: Callable[[float, Interval], float]
    total_measure_finite: bool = False
    g: Optional[Callable[[float], float]] = None
    bounds: Optional[Callable[[Interval], tuple[float, float]]] = None

    def eval(self, p: float, A: Interval) -> float:
        if A.width == 0.0:
            return 0.0
        return float(self.func(p, A))

    def moments(self, A: Interval) -> np.ndarray:
        return np.array([self.eval(k, A) for k in (1, 2, 3, 4)])

    def gain_bounds(self, A: Interval) -> tuple[float, float]:
        if self.bounds is not None:
            return self.bounds(A)
        if self.g is None:
            raise ValueError("SectionalMellin needs either g or bounds for three-point atoms")
        hi = self.g(A.lo)
        lo = self.g(A.hi) if A.bounded else 0.0
        return float(lo), float(hi)


@dataclass(frozen=True)
class AtomicApprox:
    """Finite atomic measure given as parallel weight and location arrays."""

    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    locations: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.weights.tolist(), self.locations.tolist()))

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def moment(self, k: int) -> float:
        """``sum w x^(k-1)``, i.e. the same indexing as ``M(k; A)``."""
        return float(np.sum(self.weights * self.locations ** (k - 1)))

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        if self.weights.size == 0:
            return 0.0
        return float(np.sum(self.weights * np.asarray(fn(self.locations), dtype=float)))


# ---------------------------------------------------------------------------
# moment matching, array form
# ---------------------------------------------------------------------------

_DEGEN = 1e-12


def two_point_nodes(m1, m2, m3, m4):
    """Two-node Gauss rule from ``M(1..4)``; works elementwise on arrays.

    Returns ``(w1, x1, w2, x2)``.  Zero mass gives zero weights; a numerically
    degenerate or inconsistent section collapses to a single atom at ``M(2)/M(1)``.
    """
    m1, m2, m3, m4 = (np.asarray(v, dtype=float) for v in (m1, m2, m3, m4))
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = m1 > 0
        mean = np.where(ok, m2 / np.where(ok, m1, 1.0), 0.0)
        den = m1 * m3 - m2 * m2
        alpha = (m1 * m4 - m2 * m3) / den
        beta = (m2 * m4 - m3 * m3) / den
        disc = alpha * alpha - 4.0 * beta
        gamma = np.sqrt(np.maximum(disc, 0.0))
        x1 = 0.5 * (alpha - gamma)
        x2 = 0.5 * (alpha + gamma)
        p = (x2 - mean) / gamma
    # path gains are non-negative; moments that are pure rounding noise can put
    # a node below zero, and the single mean atom keeps the rule an upper estimate
    good = (ok & (den > _DEGEN * np.abs(m1 * m3)) & (disc > 0) & np.isfinite(p) & (p >= 0) & (p <= 1)
            & (x1 >= -1e-12 * np.abs(x2)))
    w1 = np.where(good, m1 * p, np.where(ok, m1, 0.0))
    w2 = np.where(good, m1 * (1.0 - p), 0.0)
    x1 = np.where(good, np.maximum(x1, 0.0), mean)
    x2 = np.where(good, x2, mean)
    return w1, x1, w2, x2


def three_point_nodes(m1, m2, m3, m4, z1, z3):
    """Endpoint-anchored three-node rule on ``[z1, z3]`` from ``M(1..4)``.

    Returns ``(w1, w2, y2, w3)`` with nodes ``z1``, ``y2``, ``z3``.  The
    algebra runs in the shifted variable ``y = x - z1``.  If an endpoint weight
    comes out negative the two-node rule that keeps the other endpoint is used
    (it matches ``M(1..3)``).  When the interior node is ill-defined the rule
    falls back to the two-endpoint chord, which matches ``M(1..2)`` and is still
    a lower estimate for concave integrands.
    """
    m1, m2, m3, m4, z1, z3 = (np.asarray(v, dtype=float) for v in (m1, m2, m3, m4, z1, z3))
    ok = m1 > 0
    safe = np.where(ok, m1, 1.0)
    mu1, mu2, mu3 = m2 / safe, m3 / safe, m4 / safe
    d = z3 - z1
    a1 = mu1 - z1
    a2 = mu2 - 2.0 * z1 * mu1 + z1 * z1
    a3 = mu3 - 3.0 * z1 * mu2 + 3.0 * z1 * z1 * mu1 - z1 ** 3
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # the interior node is the mean of y under y (d - y) dmu, which keeps
        # nodes near an endpoint well conditioned
        u = d * a1 - a2
        y2 = (d * a2 - a3) / u
        w2 = m1 * u / (y2 * (d - y2))
        w3 = m1 * (a2 - y2 * a1) / (d * (d - y2))
        w1 = m1 - w2 - w3
        chord_q = np.clip(a1 / d, 0.0, 1.0)
    flat = ~(d > _DEGEN * np.maximum(np.abs(z3), 1e-300))
    # weights this far below zero are rounding; clipping them moves M(1) by less than 1e-9
    slack = 1e-9 * np.abs(m1)
    # below this u is rounding noise and the chord is exact to the same order
    good = (ok & ~flat & (u > 1e-10 * d * a1) & np.isfinite(y2) & np.isfinite(w2) & np.isfinite(w3)
            & (y2 > 0) & (y2 < d) & (w2 >= 0) & (w3 >= -slack) & (w1 >= -slack))
    # near-endpoint data can leave one endpoint weight negative beyond rounding; the
    # measure then has no mass there and the two-node rule keeping the other end is exact
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        yr = u / (d - a1)
        wr2 = m1 * (d - a1) / (d - yr)
        yl = a2 / a1
        wl2 = m1 * a1 / yl
    right = (ok & ~flat & ~good & (w1 < 0) & (u > 0) & np.isfinite(yr) & (yr > 0) & (yr < d)
             & (wr2 >= 0) & (wr2 <= m1 * (1 + 1e-12)))
    left = (ok & ~flat & ~good & ~right & (w3 < 0) & np.isfinite(yl) & (yl > 0) & (yl < d)
            & (wl2 >= 0) & (wl2 <= m1 * (1 + 1e-12)))
    chord = ok & ~flat & ~good & ~right & ~left
    w1 = np.where(good, np.maximum(w1, 0.0), 0.0)
    w2 = np.where(good, w2, 0.0)
    w3 = np.where(good, np.maximum(w3, 0.0), 0.0)
    y2 = np.where(good, y2, 0.0)
    w2 = np.where(right, np.minimum(wr2, m1), w2)
    w3 = np.where(right, m1 - np.minimum(wr2, m1), w3)
    y2 = np.where(right, yr, y2)
    w2 = np.where(left, np.minimum(wl2, m1), w2)
    w1 = np.where(left, m1 - np.minimum(wl2, m1), w1)
    y2 = np.where(left, yl, y2)
    w1 = np.where(chord, m1 * (1.0 - chord_q), w1)
    w3 = np.where(chord, m1 * chord_q, w3)
    # a flat section is a point mass at its common gain
    w2 = np.where(ok & flat, m1, w2)
    x2 = np.where(good | right | left, z1 + y2, np.where(ok & flat, np.where(ok, mu1, 0.0), z1))
    return w1, w2, x2, w3


def two_point_atoms(M: SectionalMellin, A: Interval) -> AtomicApprox:
    """Two-node moment-matched measure (Gauss rule) for section ``A``."""
    m = M.moments(A)
    if not m[0] > 0:
        return AtomicApprox()
    if not np.all(np.isfinite(m)):
        raise ValueError("two_point_atoms: non-finite section moments")
    w1, x1, w2, x2 = (float(v) for v in two_point_nodes(*m))
    return _pack([w1, w2], [x1, x2])


def three_point_atoms(M: SectionalMellin, A: Interval) -> AtomicApprox:
    """Endpoint-anchored three-node moment-matched measure for section ``A``."""
    m = M.moments(A)
    if not m[0] > 0:
        return AtomicApprox()
    z1, z3 = M.gain_bounds(A)
    if not (math.isfinite(z3) and np.all(np.isfinite(m))):
        raise ValueError("three_point_atoms: section must be compact in path-gain space")
    w1, w2, x2, w3 = (float(v) for v in three_point_nodes(*m, z1, z3))
    return _pack([w1, w2, w3], [z1, x2, z3])


def _pack(weights: Sequence[float], locs: Sequence[float]) -> AtomicApprox:
    w = np.asarray(weights, dtype=float)
    x = np.asarray(locs, dtype=float)
    keep = w > 0
    return AtomicApprox(w[keep], x[keep])


def h_lb(s: float, A: Interval, comp_LF: CompLF, M: SectionalMellin) -> float:
    """Gauss-rule value of ``int_A (1 - L_F(s g)) dLambda``; never below the integral."""
    if s < 0:
        raise ValueError("s must be non-negative")
    return two_point_atoms(M, A).integrate(lambda x: comp_LF(s * x))


def h_ub(s: float, A: Interval, comp_LF: CompLF, M: SectionalMellin) -> float:
    """Endpoint-anchored value of the same integral; never above it."""
    if s < 0:
        raise ValueError("s must be non-negative")
    return three_point_atoms(M, A).integrate(lambda x: comp_LF(s * x))


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WindowPartition:
    """Finite boundaries ``d_0 < ... < d_K``; the last window runs to infinity.

    If ``d_0 > 0`` an extra leading window ``[0, d_0]`` is implied so that the
    windows cover the half line.
    """

    boundaries: tuple[float, ...]

    def __post_init__(self):
        b = tuple(float(x) for x in self.boundaries)
        if not b:
            raise ValueError("WindowPartition needs at least one boundary")
        if b[0] < 0 or any(not (y > x) for x, y in zip(b, b[1:])) or not math.isfinite(b[-1]):
            raise ValueError("window boundaries must be finite, non-negative and strictly increasing")
        object.__setattr__(self, "boundaries", b)

    def windows(self) -> list[Interval]:
        b = self.boundaries
        out = [Interval(0.0, b[0])] if b[0] > 0 else []
        out.extend(Interval(x, y) for x, y in zip(b, b[1:]))
        return out

    def tail(self) -> Interval:
        return Interval(self.boundaries[-1], math.inf)

    def __iter__(self) -> Iterator[Interval]:
        yield from self.windows()
        yield self.tail()


WINDOW_SPACINGS = ("gain-inverse", "reciprocal-gain")


def uniform_path_gain_windows(g: Callable[[float], float], N_w: int, d_end: float,
                              spacing: str = "gain-inverse") -> WindowPartition:
    """Windows between ``d_min`` (where ``g`` crosses one) and ``d_end``.

    With ``f = 1/g``:

    ``gain-inverse``  boundaries ``f(x_i)`` for ``x_i`` equally spaced between
                      ``f^-1(d_min)`` and ``f^-1(d_end)``; for ``g = K r^-a`` this
                      is uniform in ``r^(1/a)`` and packs windows near ``d_min``
                      where the strongest interferers sit.
    ``reciprocal-gain``  boundaries ``f^-1(y_i)`` for ``y_i`` equally spaced
                      between ``f(d_min)`` and ``f(d_end)``.
    """
    if N_w < 1:
        raise ValueError("N_w must be at least 1")
    if spacing not in WINDOW_SPACINGS:
        raise ValueError(f"spacing must be one of {WINDOW_SPACINGS}")
    d_min = _unit_gain_distance(g, d_end)
    if not d_end > d_min:
        raise ValueError(f"d_end={d_end} must exceed d_min={d_min}")

    def f(r):
        return 1.0 / g(r)

    if spacing == "gain-inverse":
        if d_min == 0.0:
            raise ValueError("gain-inverse spacing needs a gain that exceeds one near the origin")
        x0, x1 = _gain_inverse(g, 1.0 / d_min), _gain_inverse(g, 1.0 / d_end)
        inner = [f(x0 + i * (x1 - x0) / N_w) for i in range(1, N_w)]
        bounds = [d_min] + inner + [d_end]
        # rounding can break strict order only when windows are far below resolution
        for i in range(1, len(bounds)):
            if not bounds[i] > bounds[i - 1]:
                raise ValueError("windows collapse in floating point; lower N_w")
        return WindowPartition(tuple(bounds))

    f0, f1 = f(d_min) if d_min > 0 else f(max(d_end * 1e-12, 1e-300)), f(d_end)
    bounds = [d_min]
    for i in range(1, N_w):
        target = f0 + i * (f1 - f0) / N_w
        bounds.append(find_root(lambda r: f(r) - target, Interval(bounds[-1], d_end), tol=1e-13 * d_end))
    bounds.append(d_end)
    return WindowPartition(tuple(bounds))


def _gain_inverse(g: Callable[[float], float], y: float) -> float:
    """``r`` with ``g(r) = y`` for a gain decreasing from infinity to zero."""
    lo = hi = 1.0
    while g(hi) > y:
        hi *= 2.0
        if hi > 1e300:
            raise ValueError("gain never drops to the requested level")
    while g(lo) < y:
        lo *= 0.5
        if lo < 1e-300:
            raise ValueError("gain never rises to the requested level")
    if g(lo) == y:
        return lo
    ly = math.log(y)
    return find_root(lambda r: math.log(g(r)) - ly, Interval(lo, max(hi, 2.0 * lo)), tol=1e-15 * lo)


def _unit_gain_distance(g: Callable[[float], float], d_end: float) -> float:
    if g(d_end) >= 1.0:
        return d_end
    lo = d_end
    while True:
        lo *= 0.5
        if lo < 1e-12 * d_end:
            return 0.0
        if g(lo) >= 1.0:
            break
    # the root lies in [lo, 2 lo], so a tolerance relative to lo keeps full precision
    return find_root(lambda r: g(r) - 1.0, Interval(lo, 2.0 * lo), tol=1e-15 * lo)


# ---------------------------------------------------------------------------
# Laplace transform bracket
# ---------------------------------------------------------------------------

TAIL_UPPER = ("chord", "drop")


def lt_bounds(s: float, comp_LF: CompLF, mean_F: float, M: SectionalMellin,
              part: WindowPartition, tail_upper: str = "chord") -> tuple[float, float]:
    """Lower and upper bounds on the shot-noise Laplace transform at ``s``.

    With infinite total measure the tail beyond the last boundary is handled by
    ``1 - L_F(x) <= x E[F]`` in the lower bound.  In the upper bound the tail is
    either dropped or, with ``tail_upper="chord"``, kept through the chord of the
    concave ``1 - L_F`` on ``[0, s g_end]``: ``M(2; tail) (1 - L_F(s g_end)) / g_end``.
    With finite total measure the atomic rules cover the tail as well.
    """
    if s < 0:
        raise ValueError("s must be non-negative")
    if tail_upper not in TAIL_UPPER:
        raise ValueError(f"tail_upper must be one of {TAIL_UPPER}")
    if s == 0:
        return 1.0, 1.0
    wins = part.windows()
    tail = part.tail()
    sum_lb = sum(h_lb(s, A, comp_LF, M) for A in wins)
    sum_ub = sum(h_ub(s, A, comp_LF, M) for A in wins)
    if M.total_measure_finite:
        sum_lb += h_lb(s, tail, comp_LF, M)
        sum_ub += h_ub(s, tail, comp_LF, M)
    else:
        m2 = M.eval(2, tail)
        if not math.isfinite(m2):
            raise ValueError("lt_bounds: partition end too small, tail second moment diverges")
        sum_lb += s * mean_F * m2
        if tail_upper == "chord":
            g_end = M.gain_bounds(tail)[1]
            if g_end > 0:
                sum_ub += m2 / g_end * float(np.asarray(comp_LF(np.array([s * g_end])))[0])
    return math.exp(-sum_lb), math.exp(-sum_ub)
