"""Coverage probability and ergodic efficiency bounds for sensing and communication.

Both links share one pipeline: the serving distance ``u`` is integrated on
quadrature nodes placed uniformly in its CDF; at each node the interference
field is split by blockage class (and, for sensing, by receive-beam class),
each class is cut into uniform path-gain windows and every window is replaced
by a moment-matched atomic measure.  Everything up to the atoms is
independent of the threshold, so a whole threshold grid is evaluated from one
precomputed atom bank.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .fadinglt import FadingAggregate, FadingLT, comm_fading, sensing_fading
from .netmodel import NetworkParams, db2lin, raw_gain, unit_gain_distance
from .palm import (beam_envelope_tables, class_gain, one_minus_exp_poly, serving_cdf_sensing,
                   serving_quantile_sensing,
                   void_prob, TermTable)
from .shotnoise import TAIL_UPPER, WINDOW_SPACINGS, three_point_nodes, two_point_nodes, uniform_path_gain_windows
from .waveform import ReducedAllocation

SENSING_KINDS = ("AM", "GM", "HM", "rad", "typ")
SIDES = ("LB", "UB")


@dataclass(frozen=True)
class AnalysisConfig:
    """Knobs of the analytic bounds."""

    N_w: int = 16
    M_a: int = 4
    outer_panels: int = 16
    outer_order: int = 16
    d_end: Optional[float] = None        # default 10 max(r_c, 1/beta)
    spacing: str = "gain-inverse"
    tail_upper: str = "chord"            # NLoS tail in the upper bound: chord term or dropped

    def __post_init__(self):
        if self.N_w < 1 or self.M_a < 0 or self.outer_panels < 1 or self.outer_order < 2:
            raise ValueError("invalid analysis configuration")
        if self.spacing not in WINDOW_SPACINGS:
            raise ValueError(f"spacing must be one of {WINDOW_SPACINGS}")
        if self.tail_upper not in TAIL_UPPER:
            raise ValueError(f"tail_upper must be one of {TAIL_UPPER}")

    def end_point(self, params: NetworkParams) -> float:
        return self.d_end if self.d_end is not None else 10.0 * max(params.r_c, 1.0 / params.beta)


@dataclass(frozen=True)
class CCDFCurve:
    """CCDF values on a linear threshold grid with a provenance tag."""

    tau: np.ndarray
    values: np.ndarray
    provenance: str                      # analytic-LB | analytic-UB | MC
    model: str = ""
    ci_lo: Optional[np.ndarray] = None
    ci_hi: Optional[np.ndarray] = None

    @property
    def tau_db(self) -> np.ndarray:
        return 10.0 * np.log10(self.tau)


def tau_grid_db(lo: float = -20.0, hi: float = 40.0, step: float = 0.5) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


# ---------------------------------------------------------------------------
# outer quadrature
# ---------------------------------------------------------------------------

def _outer_nodes(cfg: AnalysisConfig, t0: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on ``(t0, 1)`` graded as ``t = t0 + (1 - t0) v^3`` towards ``t0``.

    Large thresholds concentrate the integrand at small serving distances,
    which sit at small CDF values.  ``t0`` is the CDF value below which the
    desired gain is clamped to zero, so that region is cut out exactly.
    """
    x, w = np.polynomial.legendre.leggauss(cfg.outer_order)
    edges = np.linspace(0.0, 1.0, cfg.outer_panels + 1)
    h = np.diff(edges)
    v = (edges[:-1, None] + 0.5 * h[:, None] * (x[None, :] + 1)).ravel()
    wv = (0.5 * h[:, None] * w[None, :]).ravel()
    return t0 + (1.0 - t0) * v ** 3, (1.0 - t0) * wv * 3 * v ** 2


def _clamp_cdf(cdf, K: float, alpha: float, gamma: float) -> float:
    d = unit_gain_distance(K, alpha, gamma)
    return float(cdf(d)) if d > 0 else 0.0


# ---------------------------------------------------------------------------
# atom bank
# ---------------------------------------------------------------------------

@dataclass
class _AtomBank:
    """Flat list of atoms over all outer nodes and interference classes.

    ``loc`` already contains the beam factor and the division by the desired
    signal gain, so the argument of the fading transform is ``tau * loc``.
    """

    node_w: np.ndarray            # outer weight per node (probability mass)
    noise: np.ndarray             # noise over desired gain per node
    node: np.ndarray              # node index of each atom
    cls: np.ndarray               # 0 = LoS fading, 1 = NLoS fading
    weight: np.ndarray
    loc: np.ndarray
    tail: np.ndarray              # per node: sum over beams of xi_k M(2; tail) / g_desired
    scale: float                  # void-free mass multiplying the integral

    def exponent(self, tau: np.ndarray, fad_L: FadingLT, fad_N: FadingLT, with_tail: bool) -> np.ndarray:
        """Interference exponent per (tau, node)."""
        out = np.zeros((tau.size, self.node_w.size))
        # chunk over tau to bound the temporaries of mixture transforms
        step = max(1, int(2e6 // max(self.loc.size, 1)))
        for c0 in range(0, tau.size, step):
            tc = tau[c0:c0 + step]
            for k, fad in ((0, fad_L), (1, fad_N)):
                sel = self.cls == k
                if not sel.any():
                    continue
                vals = fad.comp(tc[:, None] * self.loc[sel][None, :]) * self.weight[sel]
                for i in range(tc.size):
                    out[c0 + i] += np.bincount(self.node[sel], weights=vals[i], minlength=self.node_w.size)
        if with_tail:
            out += tau[:, None] * fad_N.mean * self.tail[None, :]
        return out

    def ccdf(self, tau, fad_L: FadingLT, fad_N: FadingLT, with_tail: bool) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        if np.any(tau < 0):
            raise ValueError("thresholds must be non-negative")
        ex = self.exponent(tau, fad_L, fad_N, with_tail)
        ex += tau[:, None] * self.noise[None, :]
        vals = np.exp(-ex) @ self.node_w
        return np.clip(self.scale * vals, 0.0, 1.0)


def _class_windows(params: NetworkParams, blk: str, cfg: AnalysisConfig):
    K, a, g, d_min = class_gain(params, blk)
    part = uniform_path_gain_windows(lambda r: float(raw_gain(r, K, a, g)), cfg.N_w, cfg.end_point(params),
                                      cfg.spacing)
    # clip to the class support rather than filter, so a rounding gap at d_min never drops a window
    wins = [w for w in part.windows() if w.hi > d_min * (1 + 1e-9)]
    lo = np.array([max(w.lo, d_min) for w in wins])
    hi = np.array([w.hi for w in wins])
    return (K, a, g, d_min), lo, hi, part.tail().lo


def _atoms_for(moments: np.ndarray, lo: np.ndarray, hi: np.ndarray, gain, lower: bool):
    """Atoms of every window from its moment rows; ``lower`` selects the Gauss rule."""
    m = moments
    if lower:
        w1, x1, w2, x2 = two_point_nodes(m[:, 0], m[:, 1], m[:, 2], m[:, 3])
        return np.concatenate([w1, w2]), np.concatenate([x1, x2])
    z3 = np.minimum(gain(lo), 1.0)
    z1 = np.where(np.isinf(hi), 0.0, gain(np.where(np.isinf(hi), 1.0, hi)))
    w1, w2, y2, w3 = three_point_nodes(m[:, 0], m[:, 1], m[:, 2], m[:, 3], z1, z3)
    return np.concatenate([w1, w2, w3]), np.concatenate([z1, y2, z3])


def _bank_from_tables(u: np.ndarray, node_w: np.ndarray, desired: np.ndarray, noise_lin: float,
                      tables_fn, params: NetworkParams, cfg: AnalysisConfig, lower: bool,
                      scale: float) -> _AtomBank:
    """Assemble atoms; ``tables_fn(j)`` yields ``(blk, xi, TermTable)`` for node ``j``."""
    info = {blk: _class_windows(params, blk, cfg) for blk in ("L", "N")}
    ps = np.arange(1.0, 5.0)
    nodes, clss, ws, xs = [], [], [], []
    tail = np.zeros(u.size)
    for j in range(u.size):
        for blk, xi, tab in tables_fn(j):
            (K, a, g, d_min), lo, hi, t0 = info[blk]
            gain = lambda r, K=K, a=a, g=g: K * r ** (-a) * np.exp(-g * r)
            if blk == "L":
                # the LoS field has finite total mass, so its tail is a covered window
                lo_, hi_ = np.append(lo, t0), np.append(hi, np.inf)
            else:
                lo_, hi_ = lo, hi
                m2 = tab.mellin_windows(np.array([2.0]), np.array([t0]), np.array([np.inf]), K, a, g, d_min)[0, 0]
                tail[j] += xi * m2 / desired[j]
            mom = tab.mellin_windows(ps, lo_, hi_, K, a, g, d_min)
            keep = mom[:, 0] > 0
            if not keep.any():
                continue
            wt, x = _atoms_for(mom[keep], lo_[keep], hi_[keep], gain, lower)
            if blk == "N" and not lower and cfg.tail_upper == "chord" and m2 > 0:
                # chord of the concave fading complement over the tail: one atom at g(t0)
                g_end = min(float(gain(t0)), 1.0)
                wt, x = np.append(wt, m2 / g_end), np.append(x, g_end)
            nz = wt > 0
            ws.append(wt[nz])
            xs.append(x[nz] * xi / desired[j])
            nodes.append(np.full(int(nz.sum()), j))
            clss.append(np.full(int(nz.sum()), 0 if blk == "L" else 1))
    cat = lambda v, dt=float: np.concatenate(v).astype(dt) if v else np.zeros(0, dtype=dt)
    return _AtomBank(node_w, noise_lin / desired, cat(nodes, int), cat(clss, int), cat(ws), cat(xs), tail, scale)


# ---------------------------------------------------------------------------
# sensing
# ---------------------------------------------------------------------------

def _sensing_nodes(params: NetworkParams, cfg: AnalysisConfig):
    """Serving distances, weights and return gains of the outer rule, plus ``P(a LoS BS exists)``."""
    pl = params.pathloss
    pv = 1.0 - void_prob(params.lam_b, params.beta)
    t0 = _clamp_cdf(lambda d: serving_cdf_sensing(d, params.lam_b, params.beta) / pv,
                    pl.K_ret, 2 * pl.alpha_L, 2 * pl.gamma_L)
    t, tw = _outer_nodes(cfg, t0)
    u = serving_quantile_sensing(t, params.lam_b, params.beta)
    g = params.g_ret(u)
    # nodes inside the clamp region carry no desired signal; they never cover
    live = g > 0
    return u[live], tw[live], g[live], pv


def sensing_snr_ccdf(tau, params: NetworkParams, cfg: AnalysisConfig = AnalysisConfig()):
    """Interference-free sensing CCDF ``P(kappa g_ret(R0) / nu_rad >= tau)``."""
    u, tw, g, pv = _sensing_nodes(params, cfg)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    out = pv * (np.exp(-tau[:, None] * params.nu_rad / g[None, :]) @ tw)
    return float(out[0]) if out.size == 1 and np.ndim(tau) == 0 else out


@functools.lru_cache(maxsize=32)
def sensing_bank(params: NetworkParams, side: str, cfg: AnalysisConfig = AnalysisConfig()) -> _AtomBank:
    """Atom bank of the sensing bound on ``side`` (``LB`` uses upper envelopes and Gauss atoms)."""
    if side not in SIDES:
        raise ValueError("side must be 'LB' or 'UB'")
    u, tw, g, pv = _sensing_nodes(params, cfg)
    env = "rho" if side == "LB" else "nu"
    xis = {1: 1.0, 2: params.antenna.xi_BRx}
    beta = params.beta

    def tables(j):
        base = beam_envelope_tables(params, float(u[j]), cfg.M_a)
        for k in (1, 2):
            tab = base[(env, k)]
            for blk in ("L", "N"):
                yield blk, xis[k], tab.thin(blk, beta)

    scale = pv
    return _bank_from_tables(u, tw, g, params.nu_rad, tables, params, cfg, side == "LB", scale)


def pc_rad_bound(tau, side: str, LF_L: FadingLT, LF_N: FadingLT, params: NetworkParams,
                 cfg: AnalysisConfig = AnalysisConfig()):
    """Bound on ``P(SINR >= tau)`` for the generic sensing receiver with the given fading transforms."""
    bank = sensing_bank(params, side, cfg)
    out = bank.ccdf(tau, LF_L, LF_N, with_tail=(side == "LB"))
    return float(out[0]) if np.ndim(tau) == 0 else out


def sensing_aggregates(params: NetworkParams, alloc: ReducedAllocation,
                       kind: str) -> tuple[FadingAggregate, FadingAggregate]:
    a = params.antenna
    mk = FadingAggregate.single if kind.lower() == "typ" else (
        lambda p, x, n: FadingAggregate.from_allocation(alloc, p, x, n))
    return (mk(a.p_B, a.xi_BTx, params.fading.N_L), mk(a.p_B, a.xi_BTx, params.fading.N_N))


def sensing_coverage(tau, kind: str, side: str, params: NetworkParams, alloc: ReducedAllocation,
                     cfg: AnalysisConfig = AnalysisConfig()):
    """Sensing coverage bound for a receiver model ``kind`` in ``AM, GM, HM, rad, typ``.

    ``AM``, ``HM`` and ``rad`` are true bounds.  ``GM`` and ``typ`` use the
    gamma approximation of the geometric-mean fading, evaluated exactly for
    short allocations and through its own bounds otherwise.
    """
    if kind not in SENSING_KINDS:
        raise ValueError(f"kind must be one of {SENSING_KINDS}")
    mL, mN = sensing_aggregates(params, alloc, kind)
    return pc_rad_bound(tau, side, sensing_fading(kind, side, mL), sensing_fading(kind, side, mN), params, cfg)


def _log_axis_integral(P, v_max: float, panels: int = 48, order: int = 16) -> float:
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, v_max, panels + 1)
    h = np.diff(edges)
    v = (edges[:-1, None] + 0.5 * h[:, None] * (x[None, :] + 1)).ravel()
    wv = (0.5 * h[:, None] * w[None, :]).ravel()
    return float(np.dot(wv, P(v)))


def ergodic_sensing(side: str, kind: str, params: NetworkParams, alloc: ReducedAllocation,
                    G: Optional[float] = None, cfg: AnalysisConfig = AnalysisConfig()) -> float:
    """Bound on the ergodic sensing efficiency in bits per CPI.

    The lower bound integrates the lower CCDF against ``G/(1+G tau)``, the
    upper bound the upper CCDF against ``G/(1+G tau/2)``; both are computed on
    the axis ``v = log(1 + c G tau)``.
    """
    G = alloc.G if G is None else G
    if not G > 0:
        raise ValueError("processing gain must be positive")
    c = 1.0 if side == "LB" else 0.5
    f = 0.5 if side == "LB" else 1.0
    # SINR never exceeds kappa / nu_rad since the return gain is clamped at one
    tau_max = 60.0 / params.nu_rad
    v_max = math.log1p(c * G * tau_max)
    P = lambda v: sensing_coverage(np.expm1(v) / (c * G), kind, side, params, alloc, cfg)
    return f * _log_axis_integral(P, v_max) / math.log(2)


# ---------------------------------------------------------------------------
# communication
# ---------------------------------------------------------------------------

def psi_inv(r, params: NetworkParams):
    """NLoS distance with the same path gain as a LoS link of length ``r``."""
    pl = params.pathloss
    r = np.atleast_1d(np.asarray(r, dtype=float))
    target = math.log(pl.K_N / pl.K_L) + pl.alpha_L * np.log(r) + pl.gamma_L * r
    h = lambda x: pl.alpha_N * np.log(x) + pl.gamma_N * x - target
    lo = np.full(r.shape, 1e-300)
    hi = np.maximum(r, 1e-300)
    # h is increasing in x and h(r) >= 0 because the NLoS law decays faster
    for _ in range(200):
        mid = np.sqrt(lo * hi) if np.all(hi / lo > 4) else 0.5 * (lo + hi)
        neg = h(mid) < 0
        lo, hi = np.where(neg, mid, lo), np.where(neg, hi, mid)
        if np.all(hi - lo <= 1e-15 * hi):
            break
    out = 0.5 * (lo + hi)
    return float(out[0]) if out.size == 1 and np.ndim(r) <= 1 and r.shape == (1,) else out


def _psi_arr(r, params):
    return np.atleast_1d(psi_inv(np.atleast_1d(r), params))


def eq_intensity_comm(r, params: NetworkParams):
    """LoS-equivalent intensity of the candidate serving links (without ``2 pi lam``)."""
    pl = params.pathloss
    beta = params.beta
    r = np.asarray(r, dtype=float)
    x = _psi_arr(r.ravel(), params).reshape(r.shape)
    jac = x * (pl.alpha_L / r + pl.gamma_L) / (pl.gamma_N * x + pl.alpha_N)
    return r * np.exp(-beta * r) + jac * x * (-np.expm1(-beta * x))


def eq_measure_comm(r, params: NetworkParams):
    """Integrated LoS-equivalent intensity on ``[0, r]`` (without ``2 pi lam``)."""
    beta = params.beta
    r = np.asarray(r, dtype=float)
    x = _psi_arr(r.ravel(), params).reshape(r.shape)
    bx, br = beta * x, beta * r
    return (0.5 * bx * bx - one_minus_exp_poly(bx) + one_minus_exp_poly(br)) / beta ** 2


def serving_pdf_comm(r, params: NetworkParams):
    a = 2 * math.pi * params.lam_b
    out = a * eq_intensity_comm(r, params) * np.exp(-a * eq_measure_comm(r, params))
    return float(out) if np.ndim(out) == 0 else out


def serving_cdf_comm(r, params: NetworkParams):
    a = 2 * math.pi * params.lam_b
    out = -np.expm1(-a * eq_measure_comm(r, params))
    return float(out) if np.ndim(out) == 0 else out


def serving_quantile_comm(t, params: NetworkParams) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    a = 2 * math.pi * params.lam_b
    target = -np.log1p(-t) / a
    out = np.empty_like(t)
    for i, y in enumerate(target):
        hi = 1.0
        while float(eq_measure_comm(hi, params)) < y:
            hi *= 2.0
        out[i] = optimize.brentq(lambda r: float(eq_measure_comm(r, params)) - y, 0.0 if y == 0 else 1e-300, hi,
                                 xtol=1e-14 * hi, rtol=4 * np.finfo(float).eps) if y > 0 else 0.0
    return out


@functools.lru_cache(maxsize=32)
def comm_bank(params: NetworkParams, side: str, cfg: AnalysisConfig = AnalysisConfig()) -> _AtomBank:
    if side not in SIDES:
        raise ValueError("side must be 'LB' or 'UB'")
    pl = params.pathloss
    t0 = _clamp_cdf(lambda d: serving_cdf_comm(d, params), pl.K_L, pl.alpha_L, pl.gamma_L)
    t, tw = _outer_nodes(cfg, t0)
    u = serving_quantile_comm(t, params)
    g = params.g_los(u)
    live = g > 0
    u, tw, g = u[live], tw[live], g[live]
    x = _psi_arr(u, params)
    a = 2 * math.pi * params.lam_b
    beta = params.beta
    inf = math.inf

    def tables(j):
        yield "L", 1.0, TermTable.from_rows([(u[j], inf, a, 1, beta)])
        yield "N", 1.0, TermTable.from_rows([(x[j], inf, a, 1, 0.0), (x[j], inf, -a, 1, beta)])

    return _bank_from_tables(u, tw, g, params.nu_com, tables, params, cfg, side == "LB", 1.0)


def pc_com_bound(tau, side: str, params: NetworkParams, cfg: AnalysisConfig = AnalysisConfig()):
    """Bound on the downlink coverage probability ``P(SINR_com >= tau)``."""
    bank = comm_bank(params, side, cfg)
    fL = comm_fading(params.fading.N_L, params.antenna)
    fN = comm_fading(params.fading.N_N, params.antenna)
    out = bank.ccdf(tau, fL, fN, with_tail=(side == "LB"))
    return float(out[0]) if np.ndim(tau) == 0 else out


def ergodic_comm(side: str, params: NetworkParams, cfg: AnalysisConfig = AnalysisConfig()) -> float:
    """Bound on the ergodic downlink efficiency ``E[log2(1 + SINR)]`` in bits/s/Hz."""
    tau_max = 60.0 / params.nu_com
    v_max = math.log1p(tau_max)
    P = lambda v: pc_com_bound(np.expm1(v), side, params, cfg)
    return _log_axis_integral(P, v_max) / math.log(2)


def jcas_coverage(tau_com, tau_rad, lam_U: float, lam_S: float, kind: str, side: str,
                  params: NetworkParams, alloc: ReducedAllocation, cfg: AnalysisConfig = AnalysisConfig()):
    """Expected covered fraction of a mixed population of users and sensing objects."""
    if lam_U < 0 or lam_S < 0 or lam_U + lam_S == 0:
        raise ValueError("need non-negative densities with a positive sum")
    pc = pc_com_bound(tau_com, side, params, cfg) if lam_U > 0 else 0.0
    pr = sensing_coverage(tau_rad, kind, side, params, alloc, cfg) if lam_S > 0 else 0.0
    return (lam_U * np.asarray(pc) + lam_S * np.asarray(pr)) / (lam_U + lam_S)
