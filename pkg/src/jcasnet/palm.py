"""Serving-distance law and Palm interference intensities for the sensing link.

The interferers seen by the serving base station form a Poisson process on the
half line (distance to the serving BS).  Its exact intensity involves the
integral ``J`` below, which has no closed form, so the module also builds
piecewise poly-exponential upper (``rho``) and lower (``nu``) envelopes whose
path-loss Mellin moments reduce to incomplete gamma functions.

Envelopes are stored as flat term tables: each row is ``coef * r**n *
exp(-m r)`` on ``[lo, hi]``, optionally times ``1 - exp(-d r)`` for NLoS
thinning.  Rows with ``m < 0`` only ever live on bounded intervals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy import optimize, special

from .netmodel import NetworkParams, unit_gain_distance
from .numerics import Interval, gamma_inc_array
from .shotnoise import SectionalMellin


# ---------------------------------------------------------------------------
# serving distance
# ---------------------------------------------------------------------------

def void_prob(lam_b: float, beta: float) -> float:
    """Probability that no base station is line-of-sight to the origin."""
    return math.exp(-2.0 * math.pi * lam_b / beta ** 2)


def serving_pdf_sensing(r, lam_b: float, beta: float):
    """Defective density of the distance to the nearest LoS base station."""
    r = np.asarray(r, dtype=float)
    a = 2.0 * math.pi * lam_b
    br = beta * r
    out = a * r * np.exp(-br) * np.exp(-(a / beta ** 2) * one_minus_exp_poly(br))
    return float(out) if out.ndim == 0 else out


_Q_SERIES = np.array([(-1) ** k * (k - 1) / math.factorial(k) for k in range(2, 16)])


def one_minus_exp_poly(x):
    """``1 - e^(-x) (1 + x)`` without cancellation for small ``x``."""
    x = np.asarray(x, dtype=float)
    small = x < 0.05
    xs = np.where(small, x, 0.0)
    series = np.sum(_Q_SERIES * xs[..., None] ** np.arange(2, 16), axis=-1)
    with np.errstate(over="ignore", invalid="ignore"):
        direct = -np.expm1(-x) - x * np.exp(-x)
    out = np.where(small, series, np.where(np.isinf(x), 1.0, direct))
    return float(out) if out.ndim == 0 else out


def serving_cdf_sensing(r, lam_b: float, beta: float):
    """``P(R0 <= r)`` including the void atom at infinity (so it tends to 1 - void)."""
    r = np.asarray(r, dtype=float)
    a = 2.0 * math.pi * lam_b / beta ** 2
    return -np.expm1(-a * one_minus_exp_poly(beta * r))


def serving_quantile_sensing(t, lam_b: float, beta: float):
    """Inverse of the serving-distance CDF conditioned on a LoS BS existing."""
    t = np.asarray(t, dtype=float)
    a = 2.0 * math.pi * lam_b / beta ** 2
    pv = -math.expm1(-a)
    y = -np.log1p(-t * pv) / a          # = 1 - e^{-x}(x+1), x = beta r
    y = np.clip(y, 0.0, 1.0)
    arg = -(1.0 - y) / math.e
    x = -np.real(special.lambertw(arg, k=-1)) - 1.0
    # near the branch point lambertw loses accuracy; start from x ~ sqrt(2y) there
    small = y < 1e-6
    x = np.where(small, np.sqrt(2.0 * y) * (1.0 + np.sqrt(2.0 * y) / 3.0), x)
    # Newton polish on q(x) = y with q' = x e^-x, in relative form
    for _ in range(3):
        with np.errstate(divide="ignore", invalid="ignore"):
            step = (one_minus_exp_poly(x) - y) / (x * np.exp(-x))
        x = np.where(np.isfinite(step) & (x > 0) & (y < 1), x - step, x)
    return x / beta


# ---------------------------------------------------------------------------
# exact Palm intensity
# ---------------------------------------------------------------------------

_GLX, _GLW = np.polynomial.legendre.leggauss(12)


def j_integral(r, r0: float, z, beta: float):
    """``int_z^1 (1-u^2)^(-1/2) exp(-beta sqrt(r^2 - 2 r r0 u + r0^2)) du``.

    Evaluated as ``int_0^{arccos z} exp(-beta d(phi)) dphi`` with panels
    graded geometrically towards ``phi = 0`` where the distance has a kink
    when ``r`` is close to ``r0``.
    """
    r, z = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(z, dtype=float))
    shape = r.shape
    r = r.ravel()
    a = np.arccos(np.clip(z.ravel(), -1.0, 1.0))
    edges = np.concatenate([[0.0], 2.0 ** -np.arange(40, -1, -1)])
    lo, hi = edges[:-1], edges[1:]
    t = (0.5 * (hi - lo))[:, None] * (_GLX[None, :] + 1.0) + lo[:, None]
    w = (0.5 * (hi - lo))[:, None] * _GLW[None, :]
    t, w = t.ravel(), w.ravel()
    phi = a[:, None] * t[None, :]
    d2 = r[:, None] ** 2 + r0 ** 2 - 2.0 * r[:, None] * r0 * np.cos(phi)
    # 1 - cos(phi) loses accuracy for tiny phi; rebuild the distance from the sine form
    d2 = (r[:, None] - r0) ** 2 + 4.0 * r[:, None] * r0 * np.sin(0.5 * phi) ** 2
    f = np.exp(-beta * np.sqrt(np.maximum(d2, 0.0)))
    out = a * (f @ w)
    return float(out[0]) if shape == () else out.reshape(shape)


def palm_intensity_exact(r, r0: float, beta: float, lam_b: float):
    """Intensity of interferer distances seen from a serving BS at distance ``r0``."""
    r = np.asarray(r, dtype=float)
    inside = r <= 2 * r0
    J = np.where(inside, j_integral(r, r0, np.minimum(r / (2 * r0), 1.0), beta), 0.0)
    out = 2.0 * lam_b * r * (math.pi - J)
    return float(out) if out.ndim == 0 else out


def beam_intensities_exact(r, r0: float, beta: float, lam_b: float, theta: float):
    """Exact in-beam and out-of-beam intensities ``(lam_1, lam_2)``."""
    r = np.asarray(r, dtype=float)
    c = math.cos(theta / 2)
    z = np.minimum(r / (2 * r0), 1.0)
    inside = r < 2 * r0
    J_half = np.where(inside, j_integral(r, r0, z, beta), 0.0)
    J_beam = np.where(inside, j_integral(r, r0, np.maximum(z, c), beta), 0.0)
    lam1 = 2.0 * lam_b * r * (theta / 2 - J_beam)
    lam2 = 2.0 * lam_b * r * ((2 * math.pi - theta) / 2 - (J_half - J_beam))
    return lam1, lam2


def p_b_rx(r, r0: float, theta: float, beta: float = 0.0, lam_b: float = 1.0):
    """Probability that an interferer at distance ``r`` falls inside the receive beam."""
    lam1, _ = beam_intensities_exact(r, r0, beta, lam_b, theta)
    tot = palm_intensity_exact(r, r0, beta, lam_b)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(tot > 0, lam1 / np.where(tot > 0, tot, 1.0), theta / (2 * math.pi))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# arccos polynomial bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArccosPoly:
    """Truncated arcsine series and a tail constant bounding the remainder.

    ``pi/2 - full(z) <= arccos(z) <= pi/2 - trunc(z)`` on ``[0, 1]``.
    """

    M_a: int
    coeffs: np.ndarray      # gamma_0 .. gamma_{M_a+1}; the last one is the tail constant

    def trunc(self, z):
        z = np.asarray(z, dtype=float)
        k = np.arange(self.M_a + 1)
        return np.sum(self.coeffs[: self.M_a + 1] * z[..., None] ** (2 * k + 1), axis=-1)

    def full(self, z):
        z = np.asarray(z, dtype=float)
        return self.trunc(z) + self.coeffs[-1] * z ** (2 * self.M_a + 3)

    def arccos_lower(self, z):
        return math.pi / 2 - self.full(z)

    def arccos_upper(self, z):
        return math.pi / 2 - self.trunc(z)


def arccos_poly(M_a: int) -> ArccosPoly:
    if M_a < 0 or int(M_a) != M_a:
        raise ValueError("M_a must be a non-negative integer")
    k = np.arange(M_a + 1)
    g = np.exp(special.gammaln(k + 0.5) - special.gammaln(0.5) - special.gammaln(k + 1)) / (1 + 2 * k)
    tail = math.sqrt(2.0) * (math.pi / 2 - math.atan(math.sqrt(2.0 * M_a))) / math.sqrt(math.pi)
    return ArccosPoly(int(M_a), np.append(g, tail))


# ---------------------------------------------------------------------------
# J envelopes
# ---------------------------------------------------------------------------

def _sinc_arccos(z: float) -> float:
    """Mean of ``U`` under the arcsine law on ``[z, 1]``: ``sqrt(1-z^2)/arccos z``."""
    if z >= 1.0:
        return 1.0
    return math.sqrt(max(1.0 - z * z, 0.0)) / math.acos(z)


def _quad_sqrt_chords(a2: float, b1: float, c0: float, lo: float, hi: float) -> list[tuple[float, float, float, float]]:
    """Piecewise-linear majorant of ``f(r) = sqrt(a2 r^2 - 2 b1 r + c0)`` on ``[lo, hi]``.

    Returns pieces ``(lo_i, hi_i, c_i, m_i)`` with ``f <= c_i + m_i r``.  When
    the radicand is convex-shaped (``a2 > 0``) ``f`` is convex and chords over
    each side of its minimiser are used; otherwise a constant at the maximum.
    """
    if not hi > lo:
        return []
    f = lambda r: math.sqrt(max(a2 * r * r - 2 * b1 * r + c0, 0.0))
    if a2 > 0:
        rstar = b1 / a2
        knots = [lo, rstar, hi] if lo < rstar < hi else [lo, hi]
        out = []
        for x0, x1 in zip(knots, knots[1:]):
            m = (f(x1) - f(x0)) / (x1 - x0)
            out.append((x0, x1, f(x0) - m * x0, m))
        return out
    cands = [lo, hi]
    if a2 < 0 and lo < b1 / a2 < hi:
        cands.append(b1 / a2)
    return [(lo, hi, max(f(x) for x in cands), 0.0)]


@dataclass(frozen=True)
class ChordSet:
    """Majorants of the Jensen distance for the three J families."""

    r_M: float
    center: list
    ell: list
    u: list


def chord_set(R0: float, theta: float) -> ChordSet:
    c = math.cos(theta / 2)
    r_M = max(0.0, 2 * R0 * c)
    s_c = _sinc_arccos(max(c, 0.0))
    # fixed lower limit c: E[d^2] = r^2 + R0^2 - 2 R0 s_c r
    center = _quad_sqrt_chords(1.0, R0 * s_c, R0 * R0, 0.0, r_M)
    # lower limit r/(2R0): bound the concave mean by its chord in z
    ell = []
    if c > 0:
        m_s = (s_c - 2.0 / math.pi) / c
        c_s = 2.0 / math.pi
        ell = _quad_sqrt_chords(1.0 - m_s, R0 * c_s, R0 * R0, 0.0, r_M)
    zc = max(c, 0.0)
    m_u = (1.0 - s_c) / (1.0 - zc) if zc < 1 else 0.0
    c_u = s_c - m_u * zc
    u = _quad_sqrt_chords(1.0 - m_u, R0 * c_u, R0 * R0, r_M, 2 * R0)
    return ChordSet(r_M, center, ell, u)


def _h(pieces, r):
    r = np.asarray(r, dtype=float)
    out = np.full(r.shape, np.nan)
    for lo, hi, c, m in pieces:
        sel = (r >= lo) & (r <= hi)
        out = np.where(sel, c + m * r, out)
    return out


def j_envelopes(r, r0: float, theta: float, beta: float, M_a: int, which: str):
    """Lower and upper bounds on the J integral for one of three families.

    ``center``: ``J(r; r0, cos(theta/2))`` on ``[0, r_M]``;
    ``ell``: ``J(r; r0, r/(2 r0))`` on ``[0, r_M]``;
    ``u``: ``J(r; r0, r/(2 r0))`` on ``[r_M, 2 r0]``.
    """
    r = np.asarray(r, dtype=float)
    cs = chord_set(r0, theta)
    ap = arccos_poly(M_a)
    decay = np.exp(-beta * np.abs(r - r0))
    if which == "center":
        half = theta / 2
        return half * np.exp(-beta * _h(cs.center, r)), half * decay
    z = np.clip(r / (2 * r0), 0.0, 1.0)
    pieces = cs.ell if which == "ell" else cs.u if which == "u" else None
    if pieces is None:
        raise ValueError(f"unknown J family {which!r}")
    return ap.arccos_lower(z) * np.exp(-beta * _h(pieces, r)), ap.arccos_upper(z) * decay


# ---------------------------------------------------------------------------
# term tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TermTable:
    """Sum of ``coef * r**n * exp(-m r) * (1 - exp(-d r) if d > 0 else 1)`` on ``[lo, hi]`` per row."""

    lo: np.ndarray
    hi: np.ndarray
    coef: np.ndarray
    n: np.ndarray
    m: np.ndarray
    d: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.d is None:
            object.__setattr__(self, "d", np.zeros(np.shape(self.lo)))

    @classmethod
    def from_rows(cls, rows) -> "TermTable":
        rows = [tuple(row) + (0.0,) * (6 - len(row)) for row in rows if row[1] > row[0] and row[2] != 0.0]
        if not rows:
            z = np.zeros(0)
            return cls(z, z, z, z, z, z)
        arr = np.asarray(rows, dtype=float)
        return cls(*(arr[:, i].copy() for i in range(6)))

    def __len__(self) -> int:
        return int(self.lo.size)

    def density(self, r, closed: bool = False):
        r = np.asarray(r, dtype=float)
        rr = r[..., None]
        # half-open rows so that adjacent pieces never double count a shared end
        on = (rr >= self.lo) & ((rr <= self.hi) if closed else (rr < self.hi))
        with np.errstate(over="ignore", invalid="ignore"):
            val = self.coef * rr ** self.n * np.exp(-self.m * rr)
            val = np.where(self.d > 0, -val * np.expm1(-self.d * rr), val)
        out = np.sum(np.where(on, val, 0.0), axis=-1)
        return float(out) if out.ndim == 0 else out

    def thin(self, blockage: str, beta: float) -> "TermTable":
        """Multiply by ``exp(-beta r)`` (LoS) or ``1 - exp(-beta r)`` (NLoS)."""
        if np.any(self.d > 0):
            raise ValueError("table is already thinned")
        if blockage == "L":
            return TermTable(self.lo, self.hi, self.coef, self.n, self.m + beta)
        if blockage == "N":
            if beta == 0.0:
                return TermTable(self.lo, self.hi, np.zeros_like(self.coef), self.n, self.m)
            return TermTable(self.lo, self.hi, self.coef, self.n, self.m, np.full(self.lo.shape, float(beta)))
        raise ValueError("blockage class must be 'L' or 'N'")

    def mellin(self, p, A: Interval, K: float, alpha: float, gamma: float, d_min: float = 0.0) -> float:
        out = self.mellin_windows(np.atleast_1d(float(p)), np.array([A.lo]), np.array([A.hi]),
                                  K, alpha, gamma, d_min)
        return float(out[0, 0])

    def mellin_windows(self, ps: np.ndarray, wlo: np.ndarray, whi: np.ndarray,
                       K: float, alpha: float, gamma: float, d_min: float = 0.0) -> np.ndarray:
        """``int_W K^(p-1) r^(-alpha(p-1)) e^(-gamma(p-1) r) * density`` for every window and p.

        Returns an array of shape ``(len(wlo), len(ps))``.
        """
        ps = np.asarray(ps, dtype=float)
        nw, npw = wlo.size, ps.size
        out = np.zeros((nw, npw))
        if len(self) == 0 or nw == 0:
            return out
        lo = np.maximum(np.maximum(self.lo[None, :], wlo[:, None]), d_min)
        hi = np.minimum(self.hi[None, :], whi[:, None])
        wi, ri = np.nonzero(hi > lo)
        if wi.size == 0:
            return out
        a, b = lo[wi, ri], hi[wi, ri]
        pm1 = ps - 1.0
        s = (self.n[ri][:, None] - alpha * pm1[None, :] + 1.0).ravel()
        mu = (self.m[ri][:, None] + gamma * pm1[None, :]).ravel()
        d = np.broadcast_to(self.d[ri][:, None], (ri.size, npw)).ravel()
        A_ = np.broadcast_to(a[:, None], (ri.size, npw)).ravel()
        B_ = np.broadcast_to(b[:, None], (ri.size, npw)).ravel()
        vals = np.zeros(s.shape)
        plain = d == 0
        vals[plain] = power_exp_integral(s[plain], mu[plain], A_[plain], B_[plain])
        if not plain.all():
            th = ~plain
            vals[th] = _one_minus_exp_integral(s[th], mu[th], d[th], A_[th], B_[th])
        vals = vals.reshape(ri.size, npw) * self.coef[ri][:, None] * K ** pm1[None, :]
        np.add.at(out, wi, vals)
        return out


def _one_minus_exp_integral(s, mu, d, a, b, terms: int = 24) -> np.ndarray:
    """``int_a^b r^(s-1) e^(-mu r) (1 - e^(-d r)) dr`` without cancellation for small ``d r``.

    Below ``r = 1/d`` the factor is expanded in its (rapidly decreasing)
    alternating series; above it the plain difference loses under a digit.
    """
    t = np.clip(1.0 / d, a, b)
    out = power_exp_integral(s, mu, t, b) - power_exp_integral(s, mu + d, t, b)
    near = t > a
    if near.any():
        sn, mn, dn, an, tn = s[near], mu[near], d[near], a[near], t[near]
        acc = np.zeros(sn.shape)
        ck = np.ones(sn.shape)
        for k in range(1, terms + 1):
            ck = ck * dn / k
            acc += (1.0 if k % 2 else -1.0) * ck * power_exp_integral(sn + k, mn, an, tn)
        out[near] += acc
    return out


def power_exp_integral(s, mu, a, b) -> np.ndarray:
    """``int_a^b r^(s-1) exp(-mu r) dr`` elementwise (``b`` may be inf when ``mu > 0``)."""
    s, mu, a, b = (np.asarray(v, dtype=float) for v in np.broadcast_arrays(s, mu, a, b))
    out = np.zeros(s.shape)
    live = b > a
    pos = live & (mu > 0)
    if pos.any():
        m = mu[pos]
        zb = np.where(np.isinf(b[pos]), np.inf, m * b[pos])
        out[pos] = m ** (-s[pos]) * gamma_inc_array(s[pos], m * a[pos], zb)
    zero = live & (mu == 0)
    if zero.any():
        ss, aa, bb = s[zero], a[zero], b[zero]
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            logv = np.log(bb) - np.log(aa)
            # a^s expm1(s log(b/a)) / s keeps narrow intervals free of cancellation
            rel = np.where(aa > 0, np.expm1(ss * np.log1p((bb - aa) / np.where(aa > 0, aa, 1.0))) * aa ** ss / ss,
                           bb ** ss / ss)
            powv = np.where(np.isinf(bb), np.where(ss < 0, -aa ** ss / ss, np.inf), rel)
        out[zero] = np.where(ss == 0, logv, powv)
    neg = live & (mu < 0)
    if neg.any():
        if np.any(np.isinf(b[neg])):
            raise ValueError("growing exponential on an unbounded interval")
        out[neg] = _growing_exp_series(s[neg], -mu[neg], a[neg], b[neg])
    return out


def _growing_exp_series(s, c, a, b):
    """``int_a^b r^(s-1) e^(c r) dr`` for ``c > 0`` by termwise integration of the exponential.

    Every term has the same sign, so there is no cancellation.
    """
    x = c * b
    kmax = int(np.max(np.ceil(x + 12 * np.sqrt(x) + 40)))
    total = np.zeros_like(s)
    la, lb = np.log(np.where(a > 0, a, 1.0)), np.log(b)
    fact = 0.0
    for k in range(kmax + 1):
        e = s + k
        if k > 0:
            fact += math.log(k)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            ck = np.exp(k * np.log(c) - fact)
            small_e = np.abs(e) < 1e-12
            bt = np.exp(e * lb)
            at = np.where(a > 0, np.exp(e * la), 0.0)
            term = np.where(small_e, lb - la, (bt - at) / np.where(small_e, 1.0, e))
        total += ck * term
    return total


# ---------------------------------------------------------------------------
# intensity envelopes
# ---------------------------------------------------------------------------

def _pieces_to_rows(pieces, lo_clip, hi_clip, coef_fn, beta):
    """Rows for ``coef * exp(-beta (c + m r))`` over chord pieces clipped to a range."""
    rows = []
    for lo, hi, c, m in pieces:
        a, b = max(lo, lo_clip), min(hi, hi_clip)
        if b > a:
            for coef, n in coef_fn():
                rows.append((a, b, coef * math.exp(-beta * c), n, beta * m))
    return rows


def _abs_decay_rows(lo, hi, R0, beta, terms):
    """Rows for ``coef r^n exp(-beta |r - R0|)`` on ``[lo, hi]``, split at ``R0``."""
    rows = []
    if min(hi, R0) > lo:
        for coef, n in terms:
            rows.append((lo, min(hi, R0), coef * math.exp(-beta * R0), n, -beta))
    if hi > max(lo, R0):
        for coef, n in terms:
            rows.append((max(lo, R0), hi, coef * math.exp(beta * R0), n, beta))
    return rows


def _split_at(rows, points):
    """Cut rows at the given breakpoints so that every row sits in one elementary cell."""
    out = []
    for lo, hi, coef, n, m in rows:
        cuts = [lo] + sorted(p for p in points if lo < p < hi) + [hi]
        out.extend((x0, x1, coef, n, m) for x0, x1 in zip(cuts, cuts[1:]))
    return out


def _positive_part(rows) -> list:
    """Restrict a row set to where its total density is positive.

    The table is cut into elementary cells; inside each cell the density is
    sampled and sign changes refined by Brent's method.  Cells (or parts) where
    the density is negative are dropped, which only lowers a lower envelope.
    """
    if not rows:
        return rows
    pts = sorted({r[0] for r in rows} | {r[1] for r in rows})
    rows = _split_at(rows, pts)
    table = TermTable.from_rows(rows)
    out = []
    for x0, x1 in zip(pts, pts[1:]):
        if math.isinf(x1):
            cell = [r for r in rows if r[0] == x0 and math.isinf(r[1])]
            out.extend(cell)   # unbounded cells carry only the positive baseline term
            continue
        cell = [r for r in rows if r[0] == x0 and r[1] == x1]
        if not cell:
            continue
        sub = TermTable.from_rows(cell)
        f = lambda x: float(sub.density(min(max(x, x0), x1), closed=True))
        grid = np.linspace(x0, x1, 257)
        vals = sub.density(grid, closed=True)
        if np.all(vals > 0):
            out.extend(cell)
            continue
        if np.all(vals <= 0):
            continue
        roots = [x0]
        for i in np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]:
            if vals[i] == 0:
                roots.append(grid[i])
            elif vals[i + 1] != 0:
                roots.append(optimize.brentq(f, grid[i], grid[i + 1], xtol=1e-14 * max(x1, 1.0)))
        roots.append(x1)
        for y0, y1 in zip(roots, roots[1:]):
            if y1 <= y0:
                continue
            mid = 0.5 * (y0 + y1)
            if f(mid) > 0:
                # shave the ends by a hair so rounding cannot admit a negative sliver
                eps = 1e-12 * max(y1, 1.0)
                lo_, hi_ = (y0 + eps if y0 > x0 else y0), (y1 - eps if y1 < x1 else y1)
                if hi_ > lo_:
                    out.extend((lo_, hi_, c, n, m) for _, _, c, n, m in cell)
    del table
    return out


@dataclass(frozen=True)
class IntensityEnvelope:
    side: str          # "rho" (upper) or "nu" (lower)
    beam: int          # 1 in-beam, 2 out-of-beam
    blockage: str      # "B" (before thinning), "L" or "N"
    R0: float
    table: TermTable

    def density(self, r):
        return self.table.density(r)

    def __call__(self, r):
        return self.density(r)


def beam_envelope_tables(params: NetworkParams, R0: float, M_a: int = 4) -> Dict[Tuple[str, int], TermTable]:
    """Envelope tables before LoS thinning, keyed by ``(side, beam)``."""
    if not R0 > 0:
        raise ValueError("R0 must be positive")
    lam = params.lam_b
    beta = params.beta
    theta = params.antenna.theta_BRx
    half = theta / 2
    L = 2.0 * lam
    cs = chord_set(R0, theta)
    r_M = cs.r_M
    ap = arccos_poly(M_a)
    g_full = ap.coeffs                         # includes the tail constant
    g_trunc = ap.coeffs[: M_a + 1]

    def poly_terms(coeffs, sign=1.0):
        return [(sign * L * gk / (2 * R0) ** (2 * k + 1), 2 * k + 2) for k, gk in enumerate(coeffs)]

    inf = math.inf
    # upper envelope, in-beam
    rho1 = [(0.0, inf, L * half, 1, 0.0)]
    rho1 += _pieces_to_rows(cs.center, 0.0, r_M, lambda: [(-L * half, 1)], beta)
    rho1 += _pieces_to_rows(cs.u, r_M, 2 * R0,
                            lambda: [(-L * math.pi / 2, 1)] + poly_terms(g_full), beta)
    # upper envelope, out-of-beam
    rho2 = [(0.0, inf, L * (2 * math.pi - theta) / 2, 1, 0.0)]
    rho2 += _pieces_to_rows(cs.ell, 0.0, r_M,
                            lambda: [(-L * math.pi / 2, 1)] + poly_terms(g_full), beta)
    rho2 += _abs_decay_rows(0.0, r_M, R0, beta, [(L * half, 1)])
    # lower envelope, in-beam
    nu1 = [(0.0, inf, L * half, 1, 0.0)]
    nu1 += _abs_decay_rows(0.0, r_M, R0, beta, [(-L * half, 1)])
    nu1 += _abs_decay_rows(r_M, 2 * R0, R0, beta, [(-L * math.pi / 2, 1)] + poly_terms(g_trunc))
    # lower envelope, out-of-beam
    nu2 = [(0.0, inf, L * (2 * math.pi - theta) / 2, 1, 0.0)]
    nu2 += _abs_decay_rows(0.0, r_M, R0, beta, [(-L * math.pi / 2, 1)] + poly_terms(g_trunc))
    nu2 += _pieces_to_rows(cs.center, 0.0, r_M, lambda: [(L * half, 1)], beta)

    return {
        ("rho", 1): TermTable.from_rows(rho1),
        ("rho", 2): TermTable.from_rows(rho2),
        ("nu", 1): TermTable.from_rows(_positive_part(nu1)),
        ("nu", 2): TermTable.from_rows(_positive_part(nu2)),
    }


def intensity_envelopes(params: NetworkParams, R0: float,
                        M_a: int = 4) -> Dict[Tuple[str, str, int], IntensityEnvelope]:
    """All envelopes keyed by ``(side, blockage, beam)`` with blockage in ``B``, ``L``, ``N``."""
    base = beam_envelope_tables(params, R0, M_a)
    out = {}
    for (side, beam), tab in base.items():
        out[(side, "B", beam)] = IntensityEnvelope(side, beam, "B", R0, tab)
        for blk in ("L", "N"):
            out[(side, blk, beam)] = IntensityEnvelope(side, beam, blk, R0, tab.thin(blk, params.beta))
    return out


# ---------------------------------------------------------------------------
# Mellin transforms
# ---------------------------------------------------------------------------

def _intersect(A: Interval, B: Interval) -> Optional[Tuple[float, float]]:
    lo, hi = max(A.lo, B.lo), min(A.hi, B.hi)
    return (lo, hi) if hi > lo else None


def mellin_GL(p: float, A: Interval, B: Interval, alpha: float, gamma: float, n: float, m: float) -> float:
    """``int_{A cap B} r^(n - p alpha) exp(-(m + p gamma) r) dr``."""
    ab = _intersect(A, B)
    if ab is None:
        return 0.0
    return float(power_exp_integral(n - p * alpha + 1.0, m + p * gamma, ab[0], ab[1]))


def mellin_GN(p: float, A: Interval, B: Interval, alpha: float, gamma: float, n: float,
              m1: float, m2: float) -> float:
    """Difference ``G_L(.., m1) - G_L(.., m2)``, the NLoS-thinned form."""
    return mellin_GL(p, A, B, alpha, gamma, n, m1) - mellin_GL(p, A, B, alpha, gamma, n, m2)


def class_gain(params: NetworkParams, blockage: str) -> tuple[float, float, float, float]:
    """``(K, alpha, gamma, d_min)`` of the one-way path gain for a blockage class."""
    pl = params.pathloss
    if blockage == "L":
        K, a, g = pl.K_L, pl.alpha_L, pl.gamma_L
    elif blockage == "N":
        K, a, g = pl.K_N, pl.alpha_N, pl.gamma_N
    else:
        raise ValueError("blockage class must be 'L' or 'N'")
    return K, a, g, unit_gain_distance(K, a, g)


def table_mellin(table: TermTable, params: NetworkParams, blockage: str, *,
                 total_measure_finite: Optional[bool] = None) -> SectionalMellin:
    """Wrap a term table as a ``SectionalMellin`` for the path gain of ``blockage``."""
    K, a, g, d_min = class_gain(params, blockage)

    def func(p, A):
        return table.mellin(p, A, K, a, g, d_min)

    def gain(r):
        r = max(r, d_min)
        return K * r ** (-a) * math.exp(-g * r) if r > 0 else 1.0

    def bounds(A):
        hi = gain(A.lo)
        lo = gain(A.hi) if A.bounded else 0.0
        return min(lo, 1.0), min(hi, 1.0)

    if total_measure_finite is None:
        total_measure_finite = blockage == "L"
    return SectionalMellin(func, total_measure_finite, bounds=bounds)


def sectional_mellin(kind: Tuple[str, str, int], R0: float, params: NetworkParams, M_a: int = 4) -> SectionalMellin:
    """Sectional Mellin transform for ``kind = (side, blockage, beam)``, e.g. ``("rho", "L", 1)``."""
    side, blk, beam = kind
    env = intensity_envelopes(params, R0, M_a)[(side, blk, beam)]
    return table_mellin(env.table, params, blk)
