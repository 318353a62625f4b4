"""Laplace transforms of the aggregated fading terms seen by the sensing receiver.

A sensing interferer's fading over the allocation is ``F[t, n] = H_n B_t``
with ``H_n ~ Gamma(N_a, 1/N_a)`` per subcarrier and a per-slot beam gain
``B_t`` that is 1 with probability ``p_B`` and ``xi`` otherwise.  The
weighted arithmetic, geometric and harmonic means of ``F`` under the weights
``theta`` have no closed-form transforms; the functions here give a lower
bound (AM), a gamma moment-matched approximation with bounds (GM) and an
upper bound (HM).

Every transform accepts scalar or array ``s`` and a ``complement`` flag that
returns ``1 - L(s)`` computed without cancellation.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from .netmodel import AntennaConfig
from .waveform import ReducedAllocation

EXACT_GM_MAX_T = 12
EXACT_HM_MAX_T = 20


def _gamma_lt(s, shape: float, rate: float, complement: bool):
    """``(1 + s/rate)^(-shape)`` or its complement."""
    e = -shape * np.log1p(np.asarray(s, dtype=float) / rate)
    return -np.expm1(e) if complement else np.exp(e)


def _out(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _check_s(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("s must be non-negative")
    return s


def gamma_moment_match(q, N_a: float) -> tuple[float, float]:
    """Shape and rate of the gamma law matching the first two moments of ``prod H_n^q_n``."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size == 0 or np.any(q < 0):
        raise ValueError("q must be a non-empty vector of non-negative weights")
    if N_a <= 0:
        raise ValueError("N_a must be positive")
    g0 = special.gammaln(N_a)
    log_m1 = float(np.sum(special.gammaln(q + N_a) - g0)) - math.log(N_a)
    # log of m2 / m1^2, kept separate so that near-degenerate cases keep precision
    log_ratio = float(np.sum(special.gammaln(2 * q + N_a) - 2 * special.gammaln(q + N_a) + g0))
    if not log_ratio > 0:
        raise ValueError("second moment does not exceed the squared mean")
    alpha0 = 1.0 / math.expm1(log_ratio)
    beta0 = alpha0 / math.exp(log_m1)
    return alpha0, beta0


@dataclass(frozen=True)
class FadingAggregate:
    """Allocation marginals plus the fading and beam parameters of one blockage class."""

    w: np.ndarray
    q: np.ndarray
    p_B: float
    xi: float
    N_a: int
    _match: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        q = np.asarray(self.q, dtype=float)
        if w.ndim != 1 or q.ndim != 1 or w.size == 0 or q.size == 0:
            raise ValueError("w and q must be non-empty vectors")
        if np.any(w < 0) or np.any(q < 0):
            raise ValueError("weights must be non-negative")
        if abs(w.sum() - 1) > 1e-9 or abs(q.sum() - 1) > 1e-9:
            raise ValueError("weights must sum to one")
        if not (0 <= self.p_B <= 1) or not (0 < self.xi <= 1):
            raise ValueError("need p_B in [0, 1] and xi in (0, 1]")
        if self.N_a < 1:
            raise ValueError("N_a must be at least 1")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "_match", gamma_moment_match(q, self.N_a))

    @classmethod
    def from_allocation(cls, alloc: ReducedAllocation, p_B: float, xi: float, N_a: int) -> "FadingAggregate":
        return cls(alloc.w, alloc.q, p_B, xi, N_a)

    @classmethod
    def single(cls, p_B: float, xi: float, N_a: int) -> "FadingAggregate":
        return cls(np.ones(1), np.ones(1), p_B, xi, N_a)

    @property
    def T(self) -> int:
        return int(self.w.size)

    @property
    def N(self) -> int:
        return int(self.q.size)

    @property
    def alpha0(self) -> float:
        return self._match[0]

    @property
    def beta0(self) -> float:
        return self._match[1]


def _subset_weight_sums(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Size and weight sum of every subset of the slots."""
    T = w.size
    masks = np.array(list(itertools.product((0, 1), repeat=T)), dtype=float)
    return masks.sum(axis=1), masks @ w


def _binom_pmf(T: int, p: float) -> np.ndarray:
    """``C(T, r) p^(T-r) (1-p)^r`` for r = 0..T (r counts side-lobe slots)."""
    r = np.arange(T + 1)
    return special.comb(T, r) * p ** (T - r) * (1 - p) ** r


def _elem_sym(x: np.ndarray) -> np.ndarray:
    """Elementary symmetric polynomials ``e_0..e_T`` of ``x``."""
    e = np.zeros(x.size + 1)
    e[0] = 1.0
    for v in x:
        e[1:] = e[1:] + v * e[:-1]
    return e


def lt_gm(s, model: FadingAggregate, variant: str = "exact", *, complement: bool = False):
    """Gamma-approximated transform of the geometric-mean fading.

    ``exact`` enumerates all beam patterns (``T <= 12``); ``UB`` and ``LB``
    bound that expression and need no enumeration.
    """
    s = _check_s(s)
    a0, b0 = model.alpha0, model.beta0
    p, xi, T = model.p_B, model.xi, model.T
    if variant == "exact":
        if T > EXACT_GM_MAX_T:
            raise ValueError(f"exact enumeration needs T <= {EXACT_GM_MAX_T}, got {T}")
        r, W = _subset_weight_sums(model.w)
        prob = p ** (T - r) * (1 - p) ** r
        scale = xi ** W
        vals = _gamma_lt(s[..., None] * scale / b0, a0, 1.0, complement)
        return _out(vals @ prob)
    if variant == "UB":
        g = _gamma_lt(s[..., None] * xi / b0, a0 * model.w, 1.0, True)
        lg = np.sum(np.log1p(-(1 - p) * g), axis=-1)
        return _out(-np.expm1(lg) if complement else np.exp(lg))
    if variant == "LB":
        pr = _binom_pmf(T, p)
        mean_scale = _elem_sym(xi ** model.w) / special.comb(T, np.arange(T + 1))
        vals = _gamma_lt(s[..., None] * mean_scale / b0, a0, 1.0, complement)
        return _out(vals @ pr)
    raise ValueError(f"unknown GM variant {variant!r}")


def lt_am_lb(s, model: FadingAggregate, *, complement: bool = False):
    """Lower bound on the transform of the arithmetic-mean fading."""
    s = _check_s(s)
    T, N, Na = model.T, model.N, model.N_a
    r = np.arange(T + 1)
    scale = (model.xi - 1.0) * r / T + 1.0
    vals = _gamma_lt(s[..., None] * scale / (N * Na), N * Na, 1.0, complement)
    return _out(vals @ _binom_pmf(T, model.p_B))


def hm_moments(model: FadingAggregate) -> tuple[float, float]:
    """Lower bound on the first and upper bound on the second moment of the harmonic mean."""
    Na, p, xi, T = model.N_a, model.p_B, model.xi, model.T
    if Na <= 1:
        raise ValueError("moment bounds need N_a > 1")
    m1 = 1.0 / ((p + (1 - p) / xi) * Na / (Na - 1))
    if T <= EXACT_HM_MAX_T:
        r, W = _subset_weight_sums(model.w)
        prob = p ** (T - r) * (1 - p) ** r
        eb = float(prob @ (1 - W + W / xi) ** -2)
    else:
        # the integrand is convex in W on [0, 1]; its chord has mean 1 + (1-p)(xi^2 - 1)
        eb = 1.0 + (1 - p) * (xi * xi - 1.0)
    g0 = special.gammaln(Na)
    log_gm2 = float(np.sum(special.gammaln(2 * model.q + Na) - g0)) - 2 * math.log(Na)
    return m1, eb * math.exp(log_gm2)


def lt_hm_ub(s, model: FadingAggregate, *, complement: bool = False):
    """Upper bound on the transform of the harmonic-mean fading."""
    s = _check_s(s)
    p, xi, T = model.p_B, model.xi, model.T
    if model.N_a == 1:
        c = float(np.sum(np.sqrt(model.q))) ** 2
        pt = p ** T
        return _out(pt * _gamma_lt(s / c, 1.0, 1.0, complement)
                    + (1 - pt) * _gamma_lt(s * xi / c, 1.0, 1.0, complement))
    m1, m2 = hm_moments(model)
    k = m1 * m1 / m2
    decay = -np.expm1(-s * m2 / m1)
    return _out(k * decay if complement else 1.0 - k * decay)


def mean_am(p_B: float, xi: float) -> float:
    return p_B + (1 - p_B) * xi


def mean_gm(model: FadingAggregate) -> float:
    return model.alpha0 / model.beta0 * float(np.prod(model.p_B + (1 - model.p_B) * model.xi ** model.w))


def mean_hm_ub(model: FadingAggregate) -> float:
    """Upper bound on the mean of the harmonic-mean fading (it never exceeds the GM)."""
    return mean_gm(model)


def _comm_pmf(antenna: AntennaConfig) -> list[tuple[float, float]]:
    out = []
    for b, pb in ((1.0, antenna.p_B), (antenna.xi_BTx, 1 - antenna.p_B)):
        for z, pz in ((1.0, antenna.p_U), (antenna.xi_URx, 1 - antenna.p_U)):
            if pb * pz > 0:
                out.append((b * z, pb * pz))
    return out


def lt_comm_fading(s, N_a: int, antenna: AntennaConfig, *, complement: bool = False):
    """Transform of ``|H|^2 B Z_U`` for a downlink interferer."""
    s = _check_s(s)
    tot = 0.0
    for x, pr in _comm_pmf(antenna):
        tot = tot + pr * _gamma_lt(s * x / N_a, N_a, 1.0, complement)
    return _out(tot)


def mean_comm_fading(antenna: AntennaConfig) -> float:
    return mean_am(antenna.p_B, antenna.xi_BTx) * mean_am(antenna.p_U, antenna.xi_URx)


# ---------------------------------------------------------------------------
# dispatch used by the coverage bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FadingLT:
    """A transform, its complement and the mean used by the tail term."""

    lt: Callable
    comp: Callable
    mean: float


def sensing_fading(kind: str, side: str, model: FadingAggregate) -> FadingLT:
    """Fading transform for a sensing model kind (``AM``, ``GM``, ``HM``, ``rad``) and bound side.

    The AM, HM and generic receivers share the AM lower bound and the HM upper
    bound, since their fading transforms are ordered AM <= rad <= HM.
    """
    if side not in ("LB", "UB"):
        raise ValueError("side must be 'LB' or 'UB'")
    k = kind.upper()
    if k in ("AM", "HM", "RAD"):
        if side == "LB":
            f = lambda s, c=False: lt_am_lb(s, model, complement=c)
        else:
            f = lambda s, c=False: lt_hm_ub(s, model, complement=c)
        # the AM mean is exact for AM and dominates the rad and HM means
        mean = mean_am(model.p_B, model.xi)
    elif k in ("GM", "TYP"):
        variant = "exact" if model.T <= EXACT_GM_MAX_T else side
        f = lambda s, c=False: lt_gm(s, model, variant, complement=c)
        mean = mean_gm(model)
    else:
        raise ValueError(f"unknown sensing model kind {kind!r}")
    return FadingLT(lambda s: f(s), lambda s: f(s, True), mean)


def comm_fading(N_a: int, antenna: AntennaConfig) -> FadingLT:
    return FadingLT(lambda s: lt_comm_fading(s, N_a, antenna),
                    lambda s: lt_comm_fading(s, N_a, antenna, complement=True),
                    mean_comm_fading(antenna))
