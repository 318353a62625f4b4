"""Oracle checks behind ``jcasnet validate``.

Each check returns ``(name, passed, detail)``.  Budgets are small so the whole
suite runs in a few minutes at the configured trial count.
"""
from __future__ import annotations

import math
from typing import Callable, List, Tuple

import numpy as np

from .cli import build_alloc, build_analysis, build_params
from .coverage import pc_com_bound, sensing_coverage, serving_pdf_comm
from .fadinglt import FadingAggregate, lt_am_lb, lt_gm, lt_hm_ub
from .netmodel import db2lin
from .numerics import Interval, integrate
from .palm import beam_intensities_exact, intensity_envelopes
from .shotnoise import three_point_nodes, two_point_nodes
from .simulator import SimConfig, empirical_ccdf, simulate_comm, simulate_sensing

Check = Tuple[str, bool, str]


def _atoms() -> Check:
    w1, x1, w2, x2 = two_point_nodes(1.0, 0.5, 1 / 3, 0.25)
    ok = abs(x1 - 0.5 + math.sqrt(3) / 6) < 1e-12 and abs(w1 - 0.5) < 1e-12
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        x = rng.random(5) * rng.random()
        w = rng.random(5)
        m = np.array([np.sum(w * x ** k) for k in range(4)])
        a1, y1, a2, y2 = two_point_nodes(*m)
        b1, b2, z2, b3 = three_point_nodes(*m, 0.0, x.max() * 1.01)
        for ws, xs in (((a1, a2), (y1, y2)), ((b1, b2, b3), (0.0, z2, x.max() * 1.01))):
            got = np.array([sum(wi * xi ** k for wi, xi in zip(ws, xs)) for k in range(4)])
            worst = max(worst, float(np.max(np.abs(got - m) / np.abs(m))))
    return "atoms", ok and worst < 1e-9, f"max relative moment error {worst:.2e}"


def _envelopes(params) -> Check:
    bad = 0
    for R0 in (10.0, 80.0, 400.0):
        env = intensity_envelopes(params, R0)
        r = np.linspace(1e-3, 2.2 * R0, 2000)
        l1, l2 = beam_intensities_exact(r, R0, params.beta, params.lam_b, params.antenna.theta_BRx)
        for k, lam in ((1, l1), (2, l2)):
            tol = 1e-12 * np.max(np.abs(lam))
            bad += int(np.sum(env[("rho", "B", k)](r) < lam - tol) + np.sum(env[("nu", "B", k)](r) > lam + tol))
    return "intensity envelopes", bad == 0, f"{bad} violations"


def _mellin(params) -> Check:
    from .palm import class_gain, sectional_mellin
    worst = 0.0
    R0 = 60.0
    env = intensity_envelopes(params, R0)
    for key in (("rho", "L", 1), ("nu", "N", 2)):
        M = sectional_mellin(key, R0, params)
        K, a, g, _ = class_gain(params, key[1])
        A = Interval(20.0, 300.0)
        tab = env[key].table
        cuts = sorted({A.lo, A.hi} | {x for x in np.r_[tab.lo, tab.hi] if A.lo < x < A.hi})
        for p in (1, 2):
            f = lambda r: env[key](r) * (r ** -a * np.exp(-g * r)) ** (p - 1)
            q = sum(integrate(f, Interval(x0, x1), tol=1e-14, vectorized=True) for x0, x1 in zip(cuts, cuts[1:]))
            worst = max(worst, abs(M.eval(p, A) / K ** (p - 1) - q) / abs(q))
    return "Mellin closed forms", worst < 1e-6, f"max relative error {worst:.2e}"


def _fading() -> Check:
    rng = np.random.default_rng(3)
    w = rng.random(4); w /= w.sum()
    q = rng.random(3); q /= q.sum()
    m = FadingAggregate(w, q, 0.4, 0.1, 2)
    n = 200000
    H = rng.gamma(2, 0.5, (n, 3))
    B = np.where(rng.random((n, 4)) < 0.4, 1.0, 0.1)
    th = w[:, None] * q[None, :]
    F = B[:, :, None] * H[:, None, :]
    am = (th * F).sum((1, 2))
    hm = 1 / (th / F).sum((1, 2))
    ok = True
    for s in (0.3, 1.0, 5.0):
        ea, eh = np.exp(-s * am), np.exp(-s * hm)
        ok &= lt_am_lb(s, m) <= ea.mean() + 3 * ea.std() / math.sqrt(n)
        ok &= lt_hm_ub(s, m) >= eh.mean() - 3 * eh.std() / math.sqrt(n)
        ok &= lt_gm(s, m, "LB") <= lt_gm(s, m) + 1e-12 <= lt_gm(s, m, "UB") + 2e-12
    return "fading transforms", bool(ok), "AM/HM bounds vs Monte Carlo, GM bracket"


def _comm_pdf(params) -> Check:
    tot = integrate(lambda r: serving_pdf_comm(r, params), Interval(0.0, math.inf), tol=1e-10, vectorized=True)
    return "downlink serving density", abs(tot - 1) < 1e-6, f"integral {tot:.9f}"


def _coverage(cfg, params, jobs) -> List[Check]:
    alloc = build_alloc(cfg)
    acfg = build_analysis(cfg)
    sim = cfg["simulation"]
    scfg = SimConfig(int(sim["n_trials"]), int(sim["seed"]), sim["R_sim_m"])
    tau_db = np.arange(-10.0, 31.0, 2.0)
    tau = db2lin(tau_db)
    S = simulate_sensing(params, alloc, scfg, jobs)
    out = []
    void = math.exp(-2 * math.pi * params.lam_b / params.beta ** 2)
    frac = S.no_los.mean()
    sd = math.sqrt(void * (1 - void) / S.n)
    out.append(("void probability", abs(frac - void) <= 3 * sd + 1e-12, f"MC {frac:.4f} vs {void:.4f}"))
    for kind in ("AM", "GM", "HM", "rad"):
        c = empirical_ccdf(S.sinr[kind], tau)
        se = np.sqrt(c.values * (1 - c.values) / S.n)
        lb = sensing_coverage(tau, kind, "LB", params, alloc, acfg)
        ub = sensing_coverage(tau, kind, "UB", params, alloc, acfg)
        bad = int(np.sum((c.values < lb - 2 * se - 1e-12) | (c.values > ub + 2 * se + 1e-12)))
        out.append((f"sensing {kind} sandwich", bad == 0, f"{bad} of {tau.size} thresholds outside"))
    C = simulate_comm(params, scfg, jobs)
    c = empirical_ccdf(C.sinr["com"], tau)
    se = np.sqrt(c.values * (1 - c.values) / C.n)
    lb, ub = pc_com_bound(tau, "LB", params, acfg), pc_com_bound(tau, "UB", params, acfg)
    bad = int(np.sum((c.values < lb - 2 * se - 1e-12) | (c.values > ub + 2 * se + 1e-12)))
    out.append(("downlink sandwich", bad == 0, f"{bad} of {tau.size} thresholds outside"))
    return out


def run_checks(cfg: dict, jobs: int = 1) -> List[Check]:
    params = build_params(cfg)
    report = [_atoms(), _envelopes(params), _mellin(params), _fading(), _comm_pdf(params)]
    report += _coverage(cfg, params, jobs)
    return report
