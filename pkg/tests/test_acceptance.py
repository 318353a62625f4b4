"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -v tests/test_acceptance.py`` or directly with
``python tests/test_acceptance.py``.
"""
import filecmp
import math
import os
import sys

import numpy as np
import pytest
from scipy import stats

from jcasnet.cli import _sweep_point, load_config, main
from jcasnet.coverage import pc_com_bound, sensing_coverage, serving_quantile_comm
from jcasnet.fadinglt import _gamma_lt
from jcasnet.netmodel import db2lin, default_params, unit_gain_distance
from jcasnet.numerics import Interval, integrate
from jcasnet.palm import (TermTable, arccos_poly, beam_intensities_exact, class_gain, intensity_envelopes,
                          j_envelopes, j_integral, sectional_mellin)
from jcasnet.shotnoise import (SectionalMellin, lt_bounds, three_point_atoms, two_point_atoms,
                               uniform_path_gain_windows)
from jcasnet.simulator import OrderingViolation, SimConfig, empirical_ccdf, simulate_comm, simulate_sensing
from jcasnet.waveform import (PriorCov, ResourceGrid, ReducedAllocation, build_allocation, comb_grid,
                              fisher_constants, fisher_matrix, fisher_weights, nr_numerology3)

_LINES = []


def report(request, name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    _LINES.append(line)
    cap = request.config.pluginmanager.getplugin("capturemanager") if request else None
    if cap is not None:
        with cap.global_and_fixture_disabled():
            print("\n" + line)
    else:
        print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. moment matching
# ---------------------------------------------------------------------------

def test_moment_matching_exactness(request):
    uni = SectionalMellin(lambda p, A: (A.hi ** p - A.lo ** p) / p, True, bounds=lambda A: (A.lo, A.hi))
    g = two_point_atoms(uni, Interval(0.0, 1.0))
    uni_ok = (np.allclose(g.locations, [0.2113248654051871, 0.7886751345948129], rtol=0, atol=1e-12)
              and np.allclose(g.weights, [0.5, 0.5], rtol=0, atol=1e-12))
    params = default_params()
    rng = np.random.default_rng(1)
    worst = 0.0
    keys = [(s, b, k) for s in ("rho", "nu") for b in ("L", "N") for k in (1, 2)]
    n_sections = 0
    while n_sections < 100:
        R0 = float(10 ** rng.uniform(0.5, 2.7))
        key = keys[int(rng.integers(len(keys)))]
        M = sectional_mellin(key, R0, params)
        lo = float(10 ** rng.uniform(0, 2.5))
        A = Interval(lo, lo * float(10 ** rng.uniform(0.05, 1.0)))
        m = M.moments(A)
        if not m[0] > 0:
            continue
        n_sections += 1
        for at in (two_point_atoms(M, A), three_point_atoms(M, A)):
            got = np.array([at.moment(k) for k in (1, 2, 3, 4)])
            worst = max(worst, float(np.max(np.abs(got - m) / np.abs(m))))
    ok = uni_ok and worst <= 1e-9
    report(request, "1 moment matching", ok,
           f"uniform nodes/weights exact={uni_ok}; max relative moment error {worst:.2e} on 100 sections")


# ---------------------------------------------------------------------------
# 2. shot-noise sandwich
# ---------------------------------------------------------------------------

def _shot_instance(rng):
    lam = float(10 ** rng.uniform(-5, -3.5))
    beta = 1 / float(rng.uniform(30, 300))
    kind = str(rng.choice(["L", "N", "B"]))
    K = float(10 ** rng.uniform(-9, -6))
    # fields with infinite total mass need a steep tail for the mean-bounded remainder
    a = float(rng.uniform(2, 4)) if kind == "L" else float(rng.uniform(3, 4))
    g = float(rng.choice([0.0, 10 ** rng.uniform(-6, -2)]))
    Na = int(rng.integers(1, 6))
    c = 2 * math.pi * lam
    rows = {"L": [(0, math.inf, c, 1, beta)],
            "N": [(0, math.inf, c, 1, 0.0, beta)],
            "B": [(0, math.inf, c, 1, 0.0)]}[kind]
    return lam, beta, kind, K, a, g, Na, TermTable.from_rows(rows)


def test_shot_noise_sandwich(request):
    rng = np.random.default_rng(11)
    violations, worst = 0, 0.0
    for _ in range(20):
        lam, beta, kind, K, a, g, Na, tab = _shot_instance(rng)
        finite = kind == "L"
        d_min = unit_gain_distance(K, a, g)
        raw = lambda r: K * np.asarray(r, float) ** -a * np.exp(-g * np.asarray(r, float))
        d_end = 10 * max(1 / math.sqrt(math.pi * lam), 1 / beta)
        part = uniform_path_gain_windows(lambda r: float(raw(r)), 16, d_end)
        M = SectionalMellin(lambda p, A: tab.mellin(p, A, K, a, g, d_min), finite,
                            g=lambda r: float(min(raw(max(r, d_min)), 1.0)))
        comp = lambda x: _gamma_lt(np.asarray(x) / Na, Na, 1.0, True)
        cuts = sorted({max(w.lo, d_min) for w in part.windows()} | {d_end})

        def exact(s):
            def fn(r):
                r = np.asarray(r, float)
                ok = np.isfinite(r) & (r > 0) & (r < 1e200)
                rr = np.where(ok, r, 1.0)
                return np.where(ok, comp(s * np.where(rr >= d_min, raw(rr), 0.0)) * tab.density(rr), 0.0)
            tot = sum(integrate(fn, Interval(x0, x1), tol=1e-13, vectorized=True) for x0, x1 in zip(cuts, cuts[1:]))
            with np.errstate(divide="ignore", invalid="ignore"):
                tot += integrate(fn, Interval(d_end, math.inf), tol=1e-13, vectorized=True)
            return math.exp(-tot)

        mean_I = tab.mellin(2, Interval(d_min, math.inf), K, a, g, d_min)
        for s in np.logspace(-3, 3, 30) / mean_I:
            lb, ub = lt_bounds(float(s), comp, 1.0, M, part)
            ex = exact(float(s))
            if not (lb <= ex * (1 + 1e-9) and ex <= ub * (1 + 1e-9)):
                violations += 1
            if ex >= 0.01:
                worst = max(worst, (ub - lb) / ex)
    ok = violations == 0 and worst <= 0.10
    report(request, "2 shot-noise sandwich", ok,
           f"{violations} violations over 20x30 points; max relative gap {worst:.4f} (limit 0.10)")


# ---------------------------------------------------------------------------
# 3. estimation-rate sandwich
# ---------------------------------------------------------------------------

def test_estimation_rate_sandwich(request):
    rng = np.random.default_rng(3)
    k1, k2 = fisher_constants(nr_numerology3())
    bad = 0
    eps = np.finfo(float).eps
    for _ in range(1000):
        X = rng.normal(size=(2, 2)) * 10 ** rng.uniform(-2, 2, size=(2, 1))
        Q = PriorCov(X @ X.T)
        grid = ResourceGrid(rng.integers(0, 300, 16), rng.integers(0, 3000, 16))
        x = float(10 ** rng.uniform(-4, 2))
        G, _ = fisher_weights(grid, Q, k1, k2)
        S = Q.sqrt
        A = S @ (x * fisher_matrix(grid, k1, k2)) @ S
        tr = G * x                                   # trace via the per-element Fisher weights
        det = float(np.linalg.det(np.eye(2) + A))    # determinant via LU
        up = 0.25 * (2.0 + np.trace(A)) ** 2
        # inequalities are compared up to the rounding of the two independent routes
        tol = 16 * eps * max(1.0 + tr, det, up)
        if 1.0 + tr > det + tol or det > up + tol:
            bad += 1
    report(request, "3 estimation-rate sandwich", bad == 0, f"{bad} violations on 1000 random PSD instances")


# ---------------------------------------------------------------------------
# 4. envelope suites
# ---------------------------------------------------------------------------

def _relative_quad(f, cuts, tol=1e-13):
    """Piecewise adaptive quadrature to a relative tolerance, whatever the magnitude of ``f``."""
    pieces = list(zip(cuts, cuts[1:]))
    crude = sum(abs(integrate(f, Interval(x0, x1), tol=1.0, vectorized=True)) for x0, x1 in pieces)
    scale = crude if crude > 0 else 1.0
    return scale * sum(integrate(lambda r: f(r) / scale, Interval(x0, x1), tol=tol, vectorized=True)
                       for x0, x1 in pieces)


def test_envelope_suites(request):
    params = default_params()
    z = np.linspace(0.0, 1.0, 10_000)
    arc_bad = 0
    for M_a in (0, 2, 4, 8):
        ap = arccos_poly(M_a)
        arc_bad += int(np.sum(ap.arccos_lower(z) > np.arccos(z) + 1e-15)
                       + np.sum(np.arccos(z) > ap.arccos_upper(z) + 1e-15))
    theta = params.antenna.theta_BRx
    j_bad = 0
    for R0 in (5.0, 60.0, 250.0):
        r_M = 2 * R0 * math.cos(theta / 2)
        for which in ("center", "ell", "u"):
            r = np.linspace(r_M, 2 * R0, 10_000) if which == "u" else np.linspace(1e-6, r_M, 10_000)
            zz = np.full_like(r, math.cos(theta / 2)) if which == "center" else np.clip(r / (2 * R0), 0, 1)
            ex = j_integral(r, R0, zz, params.beta)
            lo, hi = j_envelopes(r, R0, theta, params.beta, 4, which)
            tol = 1e-12 * np.max(ex)
            j_bad += int(np.sum(lo > ex + tol) + np.sum(hi < ex - tol))
    int_bad = 0
    for R0 in (2.0, 50.0, 150.0, 700.0):
        env = intensity_envelopes(params, R0)
        r = np.linspace(1e-6, 2.5 * R0, 10_000)
        l1, l2 = beam_intensities_exact(r, R0, params.beta, params.lam_b, theta)
        for k, lam in ((1, l1), (2, l2)):
            tol = 1e-12 * np.max(np.abs(lam))
            int_bad += int(np.sum(env[("rho", "B", k)](r) < lam - tol) + np.sum(env[("nu", "B", k)](r) > lam + tol))
    worst = 0.0
    for R0 in (20.0, 120.0):
        envs = intensity_envelopes(params, R0)
        for key in (("rho", "L", 1), ("rho", "N", 2), ("nu", "L", 2), ("nu", "N", 1)):
            M = sectional_mellin(key, R0, params)
            K, a, g, d_min = class_gain(params, key[1])
            env, tab = envs[key], envs[key].table
            for A in (Interval(20.0, 150.0), Interval(150.0, 900.0)):
                cuts = sorted({A.lo, A.hi} | {x for x in np.r_[tab.lo, tab.hi] if A.lo < x < A.hi})
                for p in (1, 2, 3, 4):
                    f = lambda r: env(r) * (K * r ** -a * np.exp(-g * r)) ** (p - 1)
                    q = _relative_quad(f, cuts)
                    if q > 0:
                        worst = max(worst, abs(M.eval(p, A) - q) / q)
    ok = arc_bad == 0 and j_bad == 0 and int_bad == 0 and worst <= 1e-6
    report(request, "4 envelope suites", ok,
           f"arccos {arc_bad}, J {j_bad}, intensity {int_bad} violations; Mellin max relative error {worst:.2e}")


# ---------------------------------------------------------------------------
# 5 and 6. Monte Carlo sandwiches
# ---------------------------------------------------------------------------

TAU_DB = np.arange(-10.0, 31.0, 2.0)


def _outside(mc, lb, ub, n):
    se = np.sqrt(mc * (1 - mc) / n)
    return int(np.sum((mc < lb - 2 * se - 1e-12) | (mc > ub + 2 * se + 1e-12)))


@pytest.mark.slow
def test_sensing_monte_carlo_sandwich(request):
    params = default_params()
    alloc = build_allocation(comb_grid(264, 3168, 3, 14), nr_numerology3())
    tau = db2lin(TAU_DB)
    try:
        S = simulate_sensing(params, alloc, SimConfig(10_000, seed=2024))
        order_violations = 0
    except OrderingViolation:
        S, order_violations = None, 1
    details, ok = [], order_violations == 0
    if S is not None:
        for kind in ("AM", "GM", "HM", "rad"):
            mc = empirical_ccdf(S.sinr[kind], tau).values
            bad = _outside(mc, sensing_coverage(tau, kind, "LB", params, alloc),
                           sensing_coverage(tau, kind, "UB", params, alloc), S.n)
            ok &= bad == 0
            details.append(f"{kind} {bad}/{tau.size}")
    report(request, "5 sensing sandwich", ok,
           f"outside 2 SE: {', '.join(details)}; ordering violations {order_violations}")


@pytest.mark.slow
def test_downlink_monte_carlo_sandwich(request):
    params = default_params()
    tau = db2lin(TAU_DB)
    C = simulate_comm(params, SimConfig(10_000, seed=2025))
    mc = empirical_ccdf(C.sinr["com"], tau).values
    bad = _outside(mc, pc_com_bound(tau, "LB", params), pc_com_bound(tau, "UB", params), C.n)
    edges = np.concatenate([[0.0], serving_quantile_comm(np.arange(1, 20) / 20, params), [np.inf]])
    obs = np.histogram(C.r0, edges)[0]
    p = float(stats.chisquare(obs).pvalue)
    ok = bad == 0 and p > 0.01
    report(request, "6 downlink sandwich", ok, f"{bad}/{tau.size} outside 2 SE; serving-distance chi-square p={p:.3f}")


# ---------------------------------------------------------------------------
# 7. void probability
# ---------------------------------------------------------------------------

def test_void_probability(request):
    single = ReducedAllocation.single()
    details, ok = [], True
    for r_c, bi, seed in ((100.0, 140.0, 1), (150.0, 72.13, 2), (60.0, 50.0, 3)):
        p = default_params(r_c=r_c, beta_inv=bi)
        S = simulate_sensing(p, single, SimConfig(5000, seed=seed))
        void = math.exp(-2 * math.pi * p.lam_b / p.beta ** 2)
        frac = float(S.no_los.mean())
        z = (frac - void) / math.sqrt(void * (1 - void) / S.n)
        ok &= abs(z) <= 3
        details.append(f"({r_c:g}, {bi:g}) MC {frac:.4f} vs {void:.4f} z={z:+.2f}")
    report(request, "7 void probability", ok, "; ".join(details))


# ---------------------------------------------------------------------------
# 8. trends
# ---------------------------------------------------------------------------

@pytest.mark.slow
def test_density_trends(request):
    cfg = load_config(None)
    r_cs = (25.0, 50.0, 75.0, 100.0, 125.0, 150.0)
    sens, com = [], []
    for rc in r_cs:
        _, _, rows = _sweep_point((cfg, rc, 72.13, None, (("AM", "LB"),), True))
        vals = {(m, s): v for m, s, _, v, _, _, _ in rows}
        sens.append(vals[("sensing-AM", "LB")])
        com.append(vals[("com", "LB")])
    sens_ok = all(b <= a * 1.01 for a, b in zip(sens, sens[1:]))
    k = int(np.argmax(com))
    interior = 0 < k < len(com) - 1
    rises = all(b >= a * 0.99 for a, b in zip(com[:k], com[1:k + 1]))
    falls = all(b <= a * 1.01 for a, b in zip(com[k:], com[k + 1:]))
    ok = sens_ok and interior and rises and falls
    report(request, "8 density trends", ok,
           "sensing AM-LB " + " ".join(f"{v:.3f}" for v in sens)
           + "; downlink LB " + " ".join(f"{v:.3f}" for v in com) + f" (peak at r_c={r_cs[k]:g})")


# ---------------------------------------------------------------------------
# 9. determinism
# ---------------------------------------------------------------------------

def test_determinism(request, tmp_path):
    import yaml
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(yaml.safe_dump({
        "network": {"r_c_m": 100.0},
        "waveform": {"grid": [28, 140, 3, 14]},
        "analysis": {"outer_panels": 4, "outer_order": 8, "tau_db": {"lo": -10.0, "hi": 30.0, "step": 5.0}},
        "simulation": {"n_trials": 200, "seed": 7, "tau_db": {"lo": -10.0, "hi": 30.0, "step": 5.0}},
    }))
    dirs = [tmp_path / "a", tmp_path / "b", tmp_path / "c"]
    for d, jobs in zip(dirs, ("1", "1", "2")):
        assert main(["ccdf", "--config", str(cfg), "--out", str(d), "--jobs", jobs]) == 0
    names = sorted(f for f in os.listdir(dirs[0]) if f.endswith(".csv"))
    same = all(filecmp.cmp(dirs[0] / n, d / n, shallow=False) for d in dirs[1:] for n in names)
    report(request, "9 determinism", same and len(names) == 7,
           f"{len(names)} CSVs byte-identical across two runs and a two-worker run: {same}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
