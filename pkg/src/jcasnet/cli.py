"""Command-line experiment harness.

Subcommands write long-format CSV files (``model,side,tau_db,value,ci_lo,
ci_hi,params_hash``) plus a small plotting script next to them.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
import yaml

from .coverage import (AnalysisConfig, ergodic_comm, ergodic_sensing, pc_com_bound, sensing_coverage,
                       sensing_snr_ccdf)
from .netmodel import (AntennaConfig, BlockageParams, FadingOrders, NetworkParams, PathLossParams, db2lin)
from .simulator import SimConfig, empirical_ccdf, simulate_comm, simulate_sensing
from .waveform import (Numerology, ReducedAllocation, build_allocation, comb_allocation, comb_grid,
                       comb_strides)

log = logging.getLogger("jcasnet")

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION = 0, 2, 3

CSV_HEADER = ("model", "side", "tau_db", "value", "ci_lo", "ci_hi", "params_hash")

# Units are part of the key names: _dB and _dBm are logarithmic, _deg degrees, _m metres.
DEFAULTS: Dict[str, Dict[str, Any]] = {
    "network": {
        "f_c_GHz": 75.0,
        "K_L_dB": -75.96, "K_N_dB": -90.96,
        "alpha_L": 2.0, "alpha_N": 3.2,
        "gamma_L": 5e-6, "gamma_N": 5e-3,
        "theta_BTx_deg": 5.0, "theta_BRx_deg": 5.0, "theta_URx_deg": 30.0,
        "xi_BTx_dB": -35.0, "xi_BRx_dB": -20.0, "xi_URx_dB": -15.0,
        "G_BTx_dB": 31.0, "G_BRx_dB": 19.8, "G_URx_dB": 13.2,
        "P_t_dBm": 15.0, "P_n_dBm": -123.2,
        "N_L": 3, "N_N": 2,
        "beta_inv_m": 140.0, "r_c_m": 100.0,
        "ret_scale": None,
    },
    "waveform": {
        "delta_f_kHz": 120.0, "T_g_ns": 570.0,
        "delta_r_m": 1.0, "delta_v_mps": 1.33, "r_max_m": 300.0, "v_max_kmh": 200.0,
        # explicit comb (N_s, N_c, dN_s, dN_c); null derives it from the targets
        "grid": [264, 3168, 3, 14],
        "slot_len": 14,
    },
    "analysis": {
        "N_w": 16, "M_a": 4, "d_end_m": None, "window_spacing": "gain-inverse", "tail_upper": "chord",
        "outer_panels": 16, "outer_order": 16,
        "tau_db": {"lo": -20.0, "hi": 40.0, "step": 0.5},
    },
    "simulation": {"n_trials": 10000, "seed": 0, "R_sim_m": None, "tau_db": {"lo": -10.0, "hi": 30.0, "step": 2.0}},
    "sweeps": {
        "r_c_m": [25.0, 50.0, 75.0, 100.0, 125.0, 150.0],
        "beta_inv_m": [360.67, 72.13],
        "alpha_L": [2.0, 2.2, 2.4],
        "range_factor": 3.0,
    },
    "run": {"jobs": 1},
}
REQUIRED_SECTIONS = ("network",)


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}{k}"
        if k not in base:
            raise ConfigError(f"unknown config key '{where}'")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"'{where}' must be a mapping")
            out[k] = _merge(base[k], v, where + ".")
        else:
            out[k] = v
    return out


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed config: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    for sec in REQUIRED_SECTIONS:
        if sec not in raw:
            raise ConfigError(f"missing required section '{sec}'")
    cfg = _merge(DEFAULTS, raw)
    build_params(cfg)          # surface value errors as config errors now
    return cfg


def build_params(cfg: dict) -> NetworkParams:
    n = cfg["network"]
    deg = math.pi / 180.0
    try:
        pl = PathLossParams(
            K_L=db2lin(float(n["K_L_dB"])), K_N=db2lin(float(n["K_N_dB"])),
            alpha_L=float(n["alpha_L"]), alpha_N=float(n["alpha_N"]),
            gamma_L=float(n["gamma_L"]), gamma_N=float(n["gamma_N"]),
            ret_scale=None if n["ret_scale"] is None else float(n["ret_scale"]),
        )
        ant = AntennaConfig(
            G_BTx=db2lin(float(n["G_BTx_dB"])), G_BRx=db2lin(float(n["G_BRx_dB"])), G_URx=db2lin(float(n["G_URx_dB"])),
            theta_BTx=float(n["theta_BTx_deg"]) * deg, theta_BRx=float(n["theta_BRx_deg"]) * deg,
            theta_URx=float(n["theta_URx_deg"]) * deg,
            xi_BTx=db2lin(float(n["xi_BTx_dB"])), xi_BRx=db2lin(float(n["xi_BRx_dB"])),
            xi_URx=db2lin(float(n["xi_URx_dB"])),
        )
        r_c = float(n["r_c_m"])
        if not r_c > 0 or not float(n["beta_inv_m"]) > 0:
            raise ValueError("r_c_m and beta_inv_m must be positive")
        return NetworkParams(
            lam_b=1.0 / (math.pi * r_c * r_c), pathloss=pl,
            blockage=BlockageParams(1.0 / float(n["beta_inv_m"])), antenna=ant,
            fading=FadingOrders(int(n["N_L"]), int(n["N_N"])),
            sigma_n=db2lin(float(n["P_n_dBm"]) - float(n["P_t_dBm"])),
            f_c=float(n["f_c_GHz"]) * 1e9,
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid network parameters: {e}") from e


def build_numerology(cfg: dict) -> Numerology:
    w = cfg["waveform"]
    return Numerology(float(w["delta_f_kHz"]) * 1e3, float(w["T_g_ns"]) * 1e-9, float(cfg["network"]["f_c_GHz"]) * 1e9)


def build_alloc(cfg: dict, r_max: Optional[float] = None) -> ReducedAllocation:
    """Sensing allocation.

    With an explicit grid, a given ``r_max`` only changes the subcarrier stride
    (the spans stay fixed); without one the comb is derived from the targets.
    """
    w = cfg["waveform"]
    num = build_numerology(cfg)
    g = w["grid"]
    if g is not None:
        if not (isinstance(g, list) and len(g) == 4):
            raise ConfigError("waveform.grid must be [N_s, N_c, dN_s, dN_c]")
        N_s, N_c, dN_s, dN_c = (int(x) for x in g)
        if r_max is not None:
            dN_c = comb_strides(float(w["delta_r_m"]), float(w["delta_v_mps"]), r_max,
                                float(w["v_max_kmh"]) / 3.6, num)[3]
        grid = comb_grid(N_s, N_c, dN_s, dN_c)
    else:
        grid = comb_allocation(float(w["delta_r_m"]), float(w["delta_v_mps"]),
                               float(w["r_max_m"]) if r_max is None else r_max,
                               float(w["v_max_kmh"]) / 3.6, num)
    return build_allocation(grid, num, slot_len=int(w["slot_len"]))


def build_analysis(cfg: dict) -> AnalysisConfig:
    a = cfg["analysis"]
    try:
        return AnalysisConfig(int(a["N_w"]), int(a["M_a"]), int(a["outer_panels"]), int(a["outer_order"]),
                              None if a["d_end_m"] is None else float(a["d_end_m"]), str(a["window_spacing"]),
                              str(a["tail_upper"]))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid analysis settings: {e}") from e


def tau_db_grid(g: dict) -> np.ndarray:
    lo, hi, step = float(g["lo"]), float(g["hi"]), float(g["step"])
    if not step > 0 or hi < lo:
        raise ConfigError("tau grid needs step > 0 and hi >= lo")
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def params_hash(cfg: dict, extra: Optional[dict] = None) -> str:
    blob = {k: cfg[k] for k in ("network", "waveform", "analysis")}
    if extra:
        blob["point"] = extra
    text = json.dumps(blob, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return "nan"
    return "%.17g" % float(x)


def write_rows(path: str, rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for model, side, tau_db, value, lo, hi, h in rows:
            wr.writerow([model, side, _fmt(tau_db), _fmt(value), _fmt(lo), _fmt(hi), h])


_PLOT_TEMPLATE = '''"""Plot {csv_name}; run with python after installing matplotlib."""
import csv
from collections import defaultdict

import matplotlib.pyplot as plt

series = defaultdict(lambda: ([], []))
with open("{csv_name}") as fh:
    for row in csv.DictReader(fh):
        key = (row["model"], row["side"])
        series[key][0].append(float(row["{x}"]))
        series[key][1].append(float(row["value"]))
for (model, side), (x, y) in sorted(series.items()):
    plt.plot(x, y, label=f"{{model}} {{side}}")
plt.xlabel("{xlabel}")
plt.ylabel("{ylabel}")
plt.legend()
plt.grid(True)
plt.savefig("{png}")
'''


def write_plot_script(out_dir: str, csv_name: str, x: str = "tau_db", xlabel: str = "threshold (dB)",
                      ylabel: str = "coverage probability") -> None:
    stem = os.path.splitext(csv_name)[0]
    with open(os.path.join(out_dir, f"plot_{stem}.py"), "w", encoding="utf-8") as fh:
        fh.write(_PLOT_TEMPLATE.format(csv_name=csv_name, x=x, xlabel=xlabel, ylabel=ylabel, png=stem + ".png"))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_ccdf(cfg: dict, out_dir: str, jobs: int = 1) -> List[str]:
    params = build_params(cfg)
    alloc = build_alloc(cfg)
    acfg = build_analysis(cfg)
    h = params_hash(cfg)
    tau_db = tau_db_grid(cfg["analysis"]["tau_db"])
    tau = db2lin(tau_db)
    sim_db = tau_db_grid(cfg["simulation"]["tau_db"])
    sim_tau = db2lin(sim_db)
    s = cfg["simulation"]
    scfg = SimConfig(int(s["n_trials"]), int(s["seed"]), s["R_sim_m"])
    log.info("simulating %d sensing and downlink trials", scfg.n_trials)
    S = simulate_sensing(params, alloc, scfg, jobs)
    C = simulate_comm(params, scfg, jobs)
    os.makedirs(out_dir, exist_ok=True)
    files = []

    def mc_rows(name, samples):
        c = empirical_ccdf(samples, sim_tau, name)
        return [(name, "MC", d, v, lo, hi, h) for d, v, lo, hi in zip(sim_db, c.values, c.ci_lo, c.ci_hi)]

    def emit(fname, rows):
        path = os.path.join(out_dir, fname)
        write_rows(path, rows)
        write_plot_script(out_dir, fname)
        files.append(path)

    for kind in ("AM", "GM", "HM", "rad", "typ"):
        rows = []
        for side in ("LB", "UB"):
            vals = sensing_coverage(tau, kind, side, params, alloc, acfg)
            rows += [(kind, side, d, v, None, None, h) for d, v in zip(tau_db, vals)]
        rows += mc_rows(kind, S.sinr[kind])
        emit(f"ccdf_{kind}.csv", rows)
    rows = []
    for side in ("LB", "UB"):
        vals = pc_com_bound(tau, side, params, acfg)
        rows += [("com", side, d, v, None, None, h) for d, v in zip(tau_db, vals)]
    rows += mc_rows("com", C.sinr["com"])
    emit("ccdf_com.csv", rows)
    snr = sensing_snr_ccdf(tau, params, acfg)
    rows = [("snr", side, d, v, None, None, h) for side in ("LB", "UB") for d, v in zip(tau_db, snr)]
    kappa_g = S.sinr["snr"] if "snr" in S.sinr else None
    if kappa_g is not None:
        rows += mc_rows("snr", kappa_g)
    emit("ccdf_snr.csv", rows)
    return files


def _sweep_point(args):
    cfg, r_c, beta_inv, alpha_L, kinds, with_comm = args
    c = copy.deepcopy(cfg)
    c["network"]["r_c_m"] = r_c
    c["network"]["beta_inv_m"] = beta_inv
    if alpha_L is not None:
        c["network"]["alpha_L"] = alpha_L
    params = build_params(c)
    acfg = build_analysis(c)
    alloc = build_alloc(c, r_max=float(c["sweeps"]["range_factor"]) * r_c)
    point = {"r_c_m": r_c, "beta_inv_m": beta_inv, "alpha_L": params.pathloss.alpha_L}
    h = params_hash(c, point)
    out = []
    for kind, side in kinds:
        out.append((f"sensing-{kind}", side, None, ergodic_sensing(side, kind, params, alloc, cfg=acfg), None, None, h))
    if with_comm:
        for side in ("LB", "UB"):
            out.append(("com", side, None, ergodic_comm(side, params, acfg), None, None, h))
    return point, h, out


def _run_sweep(cfg, points, kinds, with_comm, jobs):
    args = [(cfg, rc, bi, al, kinds, with_comm) for rc, bi, al in points]
    if jobs <= 1:
        return [_sweep_point(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_sweep_point, args))


def _write_sweep(out_dir: str, name: str, results) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    main = os.path.join(out_dir, f"{name}.csv")
    write_rows(main, [row for _, _, rows in results for row in rows])
    pts = os.path.join(out_dir, f"{name}_points.csv")
    with open(pts, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("params_hash", "r_c_m", "beta_inv_m", "alpha_L"))
        for point, h, _ in results:
            wr.writerow((h, _fmt(point["r_c_m"]), _fmt(point["beta_inv_m"]), _fmt(point["alpha_L"])))
    return [main, pts]


SENSING_SWEEP_KINDS = (("AM", "LB"), ("HM", "UB"), ("GM", "LB"), ("GM", "UB"))


def cmd_sweep_density(cfg: dict, out_dir: str, jobs: int = 1) -> List[str]:
    sw = cfg["sweeps"]
    files = []
    for bi in sw["beta_inv_m"]:
        pts = [(float(rc), float(bi), None) for rc in sw["r_c_m"]]
        res = _run_sweep(cfg, pts, SENSING_SWEEP_KINDS, True, jobs)
        files += _write_sweep(out_dir, f"sweep_density_beta{float(bi):g}", res)
    return files


def cmd_sweep_pathloss(cfg: dict, out_dir: str, jobs: int = 1) -> List[str]:
    sw = cfg["sweeps"]
    bi = float(cfg["network"]["beta_inv_m"])
    pts = [(float(rc), bi, float(al)) for al in sw["alpha_L"] for rc in sw["r_c_m"]]
    res = _run_sweep(cfg, pts, (("AM", "LB"), ("HM", "UB")), False, jobs)
    return _write_sweep(out_dir, "sweep_pathloss", res)


def cmd_validate(cfg: dict, out_dir: Optional[str] = None, jobs: int = 1) -> List[str]:
    """Run the oracle checks; returns the list of failures (empty when all pass)."""
    from .validate import run_checks
    report = run_checks(cfg, jobs)
    for name, ok, detail in report:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "validate_report.txt"), "w", encoding="utf-8") as fh:
            for name, ok, detail in report:
                fh.write(f"{'PASS' if ok else 'FAIL'} {name}: {detail}\n")
    return [name for name, ok, _ in report if not ok]


COMMANDS: Dict[str, Callable] = {
    "ccdf": cmd_ccdf,
    "sweep-density": cmd_sweep_density,
    "sweep-pathloss": cmd_sweep_pathloss,
    "validate": cmd_validate,
}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jcasnet", description="Coverage bounds and Monte Carlo for JCAS networks.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="YAML config file (defaults to the reference parameter set)")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--trials", type=int, help="override simulation.n_trials")
    ap.add_argument("--seed", type=int, help="override simulation.seed")
    ap.add_argument("--jobs", type=int, help="worker processes")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config)
        if args.trials is not None:
            if args.trials < 1:
                raise ConfigError("--trials must be at least 1")
            cfg["simulation"]["n_trials"] = args.trials
        if args.seed is not None:
            cfg["simulation"]["seed"] = args.seed
        jobs = args.jobs if args.jobs is not None else int(cfg["run"]["jobs"])
        if jobs < 1:
            raise ConfigError("jobs must be at least 1")
        build_alloc(cfg)
        build_analysis(cfg)
        tau_db_grid(cfg["analysis"]["tau_db"])
        tau_db_grid(cfg["simulation"]["tau_db"])
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    result = COMMANDS[args.command](cfg, args.out, jobs)
    if args.command == "validate":
        return EXIT_VALIDATION if result else EXIT_OK
    for f in result:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
