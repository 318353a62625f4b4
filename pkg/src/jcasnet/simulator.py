"""Monte Carlo reference for the sensing and downlink SINR models.

Base stations form a Poisson process on a disc around the origin.  Each trial
draws its own generator from ``(base_seed, trial)`` so that results do not
depend on how trials are split between workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from .coverage import CCDFCurve
from .netmodel import NetworkParams, raw_gain
from .waveform import ReducedAllocation

SENSING_MODELS = ("rad", "AM", "GM", "HM", "typ", "snr")
_ORDER_RTOL = 1e-9


class OrderingViolation(AssertionError):
    """A per-trial ordering between the sensing SINR models failed."""


@dataclass(frozen=True)
class SimConfig:
    n_trials: int
    seed: int = 0
    R_sim: Optional[float] = None

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be at least 1")

    def radius(self, params: NetworkParams) -> float:
        floor = 5.0 * max(1.0 / params.beta, params.r_c)
        if self.R_sim is None:
            return floor
        if self.R_sim < floor:
            raise ValueError(f"R_sim must be at least {floor:.6g} m")
        return float(self.R_sim)


@dataclass
class TrialOutcome:
    sinr: Dict[str, float]
    r0: float                    # serving distance (LoS-equivalent for the downlink); inf if none
    no_los: bool = False
    n_bs: int = 0


def trial_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(i)]))


def _drop_bs(rng: np.random.Generator, lam: float, R: float) -> np.ndarray:
    n = rng.poisson(lam * math.pi * R * R)
    rad = R * np.sqrt(rng.random(n))
    ang = 2 * math.pi * rng.random(n)
    return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])


def _beam(rng: np.random.Generator, shape, p_main: float, xi: float) -> np.ndarray:
    return np.where(rng.random(shape) < p_main, 1.0, xi)


def _class_gain(params: NetworkParams, d: np.ndarray, los: np.ndarray) -> np.ndarray:
    if d.size == 0:
        return d
    d = np.maximum(d, 1e-300)
    return np.where(los, params.g_los(d), params.g_nlos(d))


def run_sensing_trial(rng: np.random.Generator, params: NetworkParams, alloc: ReducedAllocation,
                      R_sim: float) -> TrialOutcome:
    """One snapshot of the monostatic sensing link of the typical target at the origin."""
    pos = _drop_bs(rng, params.lam_b, R_sim)
    r = np.hypot(pos[:, 0], pos[:, 1])
    los0 = rng.random(r.size) < np.exp(-params.beta * r)
    if not los0.any():
        return TrialOutcome({m: 0.0 for m in SENSING_MODELS}, math.inf, True, int(r.size))
    i0 = int(np.flatnonzero(los0)[np.argmin(r[los0])])
    x0 = pos[i0]
    others = np.delete(pos, i0, axis=0)
    dv = others - x0
    d = np.hypot(dv[:, 0], dv[:, 1])
    # blockage towards the serving BS is drawn afresh for every interferer
    los = rng.random(d.size) < np.exp(-params.beta * d)
    L = _class_gain(params, d, los)
    # receive-beam gain: boresight points from the serving BS to the target
    to_target = -x0 / np.hypot(*x0)
    cosang = (dv @ to_target) / np.maximum(d, 1e-300)
    ant = params.antenna
    Z = np.where(cosang >= math.cos(ant.theta_BRx / 2), 1.0, ant.xi_BRx)
    T, N = alloc.T, alloc.N
    K = d.size
    Na = np.where(los, params.fading.N_L, params.fading.N_N).astype(float)
    H = rng.gamma(Na[:, None], 1.0 / Na[:, None], size=(K, N))
    B = _beam(rng, (K, T), ant.p_B, ant.xi_BTx)
    kappa = rng.exponential()
    g = float(params.g_ret(np.hypot(*x0)))
    nu = params.nu_rad
    th = alloc.theta
    c = Z * L
    # interference per resource element: sum_k c_k B_kt H_kn
    I_tn = (B * c[:, None]).T @ H if K else np.zeros((T, N))
    rad = float(np.sum(th * kappa * g / (I_tn + nu)))
    logB, logH = np.log(B), np.log(H)
    w, q = alloc.w, alloc.q
    # the arithmetic mean weighs each element by theta; only GM factorizes into the marginals
    am = np.einsum("tn,kt,kn->k", th, B, H) if K else np.zeros(0)
    gm = np.exp(logB @ w + logH @ q)
    hm = 1.0 / np.einsum("tn,kt,kn->k", th, 1.0 / B, 1.0 / H) if K else np.zeros(0)
    typ_f = B[:, 0] * H[:, 0] if K else np.zeros(0)
    s = {
        "rad": rad,
        "AM": kappa * g / (float(c @ am) + nu),
        "GM": kappa * g / (float(c @ gm) + nu),
        "HM": kappa * g / (float(c @ hm) + nu),
        "typ": kappa * g / (float(c @ typ_f) + nu),
        "snr": kappa * g / nu,
    }
    _check_order(s)
    return TrialOutcome(s, float(np.hypot(*x0)), False, int(r.size))


def _check_order(s: Dict[str, float]) -> None:
    tol = lambda a, b: a <= b * (1 + _ORDER_RTOL) + 1e-300
    if not (tol(s["AM"], s["rad"]) and tol(s["rad"], s["HM"]) and tol(s["AM"], s["GM"]) and tol(s["GM"], s["HM"])):
        raise OrderingViolation(f"sensing SINR ordering failed: {s}")


def los_equivalent_distance(params: NetworkParams, gain: float) -> float:
    """LoS distance whose (unclamped) path gain equals ``gain``."""
    pl = params.pathloss
    h = lambda r: math.log(pl.K_L) - pl.alpha_L * math.log(r) - pl.gamma_L * r - math.log(gain)
    lo, hi = 1e-12, 1.0
    while h(hi) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = math.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
        if h(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def run_comm_trial(rng: np.random.Generator, params: NetworkParams, R_sim: float) -> TrialOutcome:
    """One snapshot of the downlink of the typical user at the origin."""
    pos = _drop_bs(rng, params.lam_b, R_sim)
    r = np.hypot(pos[:, 0], pos[:, 1])
    los = rng.random(r.size) < np.exp(-params.beta * r)
    if r.size == 0:
        return TrialOutcome({"com": 0.0}, math.inf, False, 0)
    pl = params.pathloss
    # association compares unclamped gains; the clamp only limits received power
    raw = np.where(los, raw_gain(r, pl.K_L, pl.alpha_L, pl.gamma_L), raw_gain(r, pl.K_N, pl.alpha_N, pl.gamma_N))
    i0 = int(np.argmax(raw))
    L = _class_gain(params, r, los)
    ant = params.antenna
    Na = np.where(los, params.fading.N_L, params.fading.N_N).astype(float)
    H = rng.gamma(Na, 1.0 / Na)
    B = _beam(rng, r.size, ant.p_B, ant.xi_BTx)
    Zu = _beam(rng, r.size, ant.p_U, ant.xi_URx)
    h0 = rng.exponential()
    mask = np.ones(r.size, bool)
    mask[i0] = False
    interf = float(np.sum((H * B * Zu * L)[mask]))
    sinr = h0 * float(L[i0]) / (interf + params.nu_com)
    r_eq = float(r[i0]) if los[i0] else los_equivalent_distance(params, float(raw[i0]))
    return TrialOutcome({"com": sinr}, r_eq, False, int(r.size))


# ---------------------------------------------------------------------------
# batch runs
# ---------------------------------------------------------------------------

@dataclass
class SampleSet:
    """Per-trial SINR samples by model, plus serving distances."""

    sinr: Dict[str, np.ndarray]
    r0: np.ndarray
    no_los: np.ndarray

    @property
    def n(self) -> int:
        return int(self.r0.size)


def _sensing_chunk(args):
    params, alloc, R, seed, idx = args
    return [run_sensing_trial(trial_rng(seed, i), params, alloc, R) for i in idx]


def _comm_chunk(args):
    params, R, seed, idx = args
    return [run_comm_trial(trial_rng(seed, i), params, R) for i in idx]


def _collect(outs: Sequence[TrialOutcome], models: Sequence[str]) -> SampleSet:
    return SampleSet(
        {m: np.array([o.sinr[m] for o in outs]) for m in models},
        np.array([o.r0 for o in outs]),
        np.array([o.no_los for o in outs]),
    )


def _run(fn, make_args, n: int, jobs: int):
    chunks = [range(i, min(i + 1000, n)) for i in range(0, n, 1000)]
    if jobs <= 1 or len(chunks) == 1:
        return [o for c in chunks for o in fn(make_args(c))]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return [o for res in ex.map(fn, [make_args(c) for c in chunks]) for o in res]


def simulate_sensing(params: NetworkParams, alloc: ReducedAllocation, cfg: SimConfig, jobs: int = 1) -> SampleSet:
    R = cfg.radius(params)
    outs = _run(_sensing_chunk, lambda c: (params, alloc, R, cfg.seed, c), cfg.n_trials, jobs)
    return _collect(outs, SENSING_MODELS)


def simulate_comm(params: NetworkParams, cfg: SimConfig, jobs: int = 1) -> SampleSet:
    R = cfg.radius(params)
    outs = _run(_comm_chunk, lambda c: (params, R, cfg.seed, c), cfg.n_trials, jobs)
    return _collect(outs, ("com",))


def empirical_ccdf(samples, tau, model: str = "", z: float = 1.96) -> CCDFCurve:
    """Fraction of samples at or above each threshold with a normal-approximation interval."""
    x = np.sort(np.asarray(samples, dtype=float))
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    p = (n - np.searchsorted(x, tau, side="left")) / n
    se = np.sqrt(p * (1 - p) / n)
    return CCDFCurve(tau, p, "MC", model, np.clip(p - z * se, 0, 1), np.clip(p + z * se, 0, 1))


def ergodic_estimate(samples, G: float = 1.0, form: str = "comm", z: float = 1.96) -> tuple[float, float]:
    """Sample mean of the rate functional and the half-width of its interval."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("no samples")
    if form == "sensing-LB":
        v = 0.5 * np.log2(1 + G * x)
    elif form == "sensing-UB":
        v = np.log2(1 + 0.5 * G * x)
    elif form == "comm":
        v = np.log2(1 + x)
    else:
        raise ValueError(f"unknown form {form!r}")
    mean = math.fsum(v) / v.size
    sd = math.sqrt(math.fsum((v - mean) ** 2) / max(v.size - 1, 1))
    return mean, z * sd / math.sqrt(v.size)
