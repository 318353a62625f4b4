"""Special functions, quadrature and root finding used by the analytic modules.

Everything here is pure and reentrant.  ``gamma_inc`` is vectorised over numpy
arrays because the coverage integrals evaluate it on large batches of window
moments.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize, special


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class IntegrationError(RuntimeError):
    """Adaptive quadrature ran out of budget.

    The best estimate and its error bound are kept on the exception so that a
    caller can decide whether the partial answer is good enough.
    """

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate!r}, error={error!r})")
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class Interval:
    """Closed interval ``[lo, hi]`` on the half line; ``hi`` may be ``inf``."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval bounds must not be NaN")
        if lo < 0.0 or math.isinf(lo):
            raise ValueError(f"interval lower bound must be finite and >= 0, got {lo}")
        if hi < lo:
            raise ValueError(f"interval upper bound {hi} below lower bound {lo}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


# ---------------------------------------------------------------------------
# incomplete gamma
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)
_CF_SWITCH = 1.0
_CF_MAXITER = 400


def _upper_cf(a: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Gamma(a, z) by Lentz's continued fraction, for z >= 1."""
    tiny = 1e-300
    b = z + 1.0 - a
    c = np.full_like(z, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(z.shape, dtype=bool)
    for i in range(1, _CF_MAXITER + 1):
        an = -i * (i - a)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = c * d
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > 1e-16
        if not active.any():
            break
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        return np.exp(a * np.log(z) - z) * h


def _upper_small_z(a: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Gamma(a, z) for a <= 0 and 0 < z < 1 by downward recurrence.

    The seed sits at a + k in (0, 1] (scipy's regularised function is accurate
    there) or, for integer a, at a + k = 0 where Gamma(0, z) = E1(z).
    """
    out = np.empty_like(z)
    is_int = np.isclose(a, np.round(a), rtol=0.0, atol=1e-12)
    k = np.where(is_int, -np.round(a), np.ceil(-a))
    k = np.where(~is_int & (a + k <= 0.0), k + 1.0, k)
    a0 = np.where(is_int, 0.0, a + k)
    seed_pos = special.gammaincc(np.where(is_int, 1.0, a0), z) * special.gamma(np.where(is_int, 1.0, a0))
    seed = np.where(is_int, special.exp1(z), seed_pos)
    lz = np.log(z)
    ez = np.exp(-z)
    kmax = int(k.max()) if k.size else 0
    val = seed
    cur = a0.copy()
    for _ in range(kmax):
        step = cur > a + 0.5
        nxt = cur - 1.0
        with np.errstate(over="ignore", invalid="ignore"):
            upd = (val - np.exp(nxt * lz) * ez) / nxt
        val = np.where(step, upd, val)
        cur = np.where(step, nxt, cur)
    out[...] = val
    return out


def _upper(a: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Upper incomplete gamma for z > 0 (z may be inf) and any real a."""
    res = np.zeros(np.broadcast(a, z).shape)
    a, z = np.broadcast_arrays(a, z)
    fin = np.isfinite(z)
    pos = fin & (a > 0)
    if pos.any():
        with np.errstate(over="ignore"):
            res[pos] = special.gammaincc(a[pos], z[pos]) * special.gamma(a[pos])
    neg = fin & (a <= 0)
    cf = neg & (z >= _CF_SWITCH)
    if cf.any():
        res[cf] = _upper_cf(a[cf], z[cf])
    sm = neg & (z < _CF_SWITCH)
    if sm.any():
        res[sm] = _upper_small_z(a[sm], z[sm])
    return res


def _gl_panels(p: np.ndarray, z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """Composite Gauss-Legendre on short intervals far from the origin."""
    width = z2 - z1
    npan = np.maximum(1, np.ceil(width)).astype(int)
    out = np.zeros_like(z1)
    for m in np.unique(npan):
        sel = npan == m
        lo, hi, pp = z1[sel], z2[sel], p[sel]
        h = (hi - lo) / m
        acc = np.zeros_like(lo)
        for j in range(m):
            a = lo + j * h
            x = a[:, None] + 0.5 * h[:, None] * (_GL_NODES[None, :] + 1.0)
            f = np.exp((pp[:, None] - 1.0) * np.log(x) - x)
            acc += 0.5 * h * (f @ _GL_WEIGHTS)
        out[sel] = acc
    return out


def gamma_inc_array(p, z1, z2) -> np.ndarray:
    """Vectorised ``gamma_inc``; arguments broadcast against each other."""
    p, z1, z2 = np.broadcast_arrays(np.asarray(p, float), np.asarray(z1, float), np.asarray(z2, float))
    p, z1, z2 = p.astype(float), z1.astype(float), z2.astype(float)
    if np.any(np.isnan(p) | np.isnan(z1) | np.isnan(z2)):
        raise DomainError("gamma_inc: NaN argument")
    if np.any(z1 < 0) or np.any(z2 < z1) or np.any(np.isinf(z1)):
        raise DomainError("gamma_inc: need 0 <= z1 <= z2 with z1 finite")
    if np.any((p <= 0) & (z1 == 0) & (z2 > 0)):
        raise DomainError("gamma_inc: integrand not integrable at 0 for p <= 0")
    # Gamma(p) overflows for subnormal p; there the p = 0 value is exact to O(p)
    p = np.where((p > 0) & (p < 1e-300) & (z1 > 0), 0.0, p)
    out = np.zeros(p.shape)
    live = z2 > z1
    width = z2 - z1
    short = live & np.isfinite(z2) & (z1 > 0) & (width <= 0.25 * z1) & (width <= 4.0)
    if short.any():
        out[short] = _gl_panels(p[short], z1[short], z2[short])

    # p > 0: choose the side of the regularised function that avoids cancellation
    pos = live & ~short & (p > 0)
    if pos.any():
        pp, a, b = p[pos], z1[pos], z2[pos]
        with np.errstate(over="ignore", invalid="ignore"):
            # difference on the side whose regularised values are small
            lower = np.isfinite(b) & (special.gammainc(pp, np.where(np.isfinite(b), b, 0.0)) <= 0.5)
            g = special.gamma(pp)
            v_low = g * (special.gammainc(pp, np.where(lower, b, 0.0)) - special.gammainc(pp, a))
            v_up = g * (special.gammaincc(pp, a) - special.gammaincc(pp, np.where(np.isfinite(b), b, np.inf)))
        out[pos] = np.where(lower, v_low, v_up)

    neg = live & ~short & (p <= 0)
    if neg.any():
        pp, a, b = p[neg], z1[neg], z2[neg]
        ua = _upper(pp, a)
        ub = np.where(np.isfinite(b), _upper(pp, np.where(np.isfinite(b), b, 1.0)), 0.0)
        out[neg] = ua - ub

    if not np.all(np.isfinite(out)):
        raise OverflowError("gamma_inc: result not representable in double precision")
    return out


def gamma_inc(p: float, z1: float, z2: float) -> float:
    """Generalised incomplete gamma ``int_{z1}^{z2} x^(p-1) e^(-x) dx``.

    ``p`` may be any real number, including negative non-integers, as long as
    ``z1 > 0`` whenever ``p <= 0``.  ``z2`` may be ``inf``.

    >>> round(gamma_inc(1.0, 1.0, 2.0), 6)
    0.232544
    """
    return float(gamma_inc_array(p, z1, z2))


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod quadrature
# ---------------------------------------------------------------------------

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_K15_X = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_K15_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_G7_W = np.zeros(15)
_G7_W[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(f: Callable[[np.ndarray], np.ndarray], a: float, b: float) -> tuple[float, float]:
    c, h = 0.5 * (a + b), 0.5 * (b - a)
    fx = np.asarray(f(c + h * _K15_X), dtype=float)
    k = h * float(fx @ _K15_W)
    g = h * float(fx @ _G7_W)
    return k, abs(k - g)


def integrate(f: Callable[[float], float], iv: Interval, tol: float = 1e-10, *,
              vectorized: bool = False, max_intervals: int = 4000) -> float:
    """Integrate ``f`` over ``iv`` by globally adaptive G7/K15 subdivision.

    A semi-infinite interval is mapped onto ``[0, 1)`` with ``x = a + t/(1-t)``.
    ``tol`` is used both as absolute and relative tolerance; whichever is
    looser stops the refinement.  With ``vectorized=True`` the integrand is
    called on arrays of nodes.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if iv.width == 0.0:
        return 0.0
    if vectorized:
        fv = f
    else:
        def fv(x):
            return np.array([f(float(xi)) for xi in x])

    if iv.bounded:
        g, a, b = fv, iv.lo, iv.hi
    else:
        lo = iv.lo

        def g(t):
            t = np.asarray(t)
            return fv(lo + t / (1.0 - t)) / (1.0 - t) ** 2
        a, b = 0.0, 1.0

    val, err = _gk15(g, a, b)
    heap = [(-err, a, b, val)]
    total, total_err = val, err
    while total_err > max(tol, tol * abs(total)):
        if len(heap) >= max_intervals:
            raise IntegrationError("integrate: subdivision budget exhausted", total, total_err)
        e, lo_, hi_, v = heapq.heappop(heap)
        mid = 0.5 * (lo_ + hi_)
        if mid <= lo_ or mid >= hi_:
            raise IntegrationError("integrate: interval collapsed to machine precision", total, total_err)
        v1, e1 = _gk15(g, lo_, mid)
        v2, e2 = _gk15(g, mid, hi_)
        heapq.heappush(heap, (-e1, lo_, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi_, v2))
        total = sum(item[3] for item in heap)
        total_err = sum(-item[0] for item in heap)
        if not math.isfinite(total):
            raise IntegrationError("integrate: non-finite integrand values", total, total_err)
    return total


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------

def find_root(f: Callable[[float], float], bracket: Interval, tol: float = 1e-12) -> float:
    """Root of a continuous monotone ``f`` inside ``bracket``.

    Brent's method does the work; plain bisection takes over if it fails to
    converge.  Raises ``ValueError`` when the endpoints do not bracket a root.
    """
    lo, hi = bracket.lo, bracket.hi
    if not bracket.bounded:
        raise ValueError("find_root: bracket must be bounded")
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if not (math.isfinite(flo) and math.isfinite(fhi)) or flo * fhi > 0:
        raise ValueError(f"find_root: invalid bracket, f({lo})={flo}, f({hi})={fhi}")
    try:
        return float(optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200))
    except (RuntimeError, ValueError):
        pass
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)
