"""Physical-layer parameters and the deterministic model functions.

All gains are linear inside the package; conversion to and from dB happens only
at the configuration boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict

import numpy as np

C0 = 299_792_458.0


def db2lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0) if np.ndim(x_db) else 10.0 ** (float(x_db) / 10.0)


def lin2db(x):
    return 10.0 * np.log10(x) if np.ndim(x) else 10.0 * math.log10(x)


def _positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class PathLossParams:
    """Log-distance path loss with absorption, ``K r^-alpha exp(-gamma r)``.

    ``ret_scale`` multiplies ``r^(-2 alpha_L) exp(-2 gamma_L r)`` in the two-way
    radar return.  ``None`` selects ``K_L / (4 pi)``, the monostatic radar
    equation written with a Friis one-way intercept.
    """

    K_L: float
    K_N: float
    alpha_L: float
    alpha_N: float
    gamma_L: float
    gamma_N: float
    ret_scale: float | None = None

    def __post_init__(self):
        for name in ("K_L", "K_N", "alpha_L", "alpha_N"):
            _positive(name, getattr(self, name))
        for name in ("gamma_L", "gamma_N"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be non-negative, got {v}")
        if self.K_N > self.K_L:
            raise ValueError("K_N must not exceed K_L")
        if self.alpha_N < self.alpha_L:
            raise ValueError("alpha_N must be at least alpha_L")
        if self.ret_scale is not None:
            _positive("ret_scale", self.ret_scale)

    @property
    def K_ret(self) -> float:
        return self.K_L / (4.0 * math.pi) if self.ret_scale is None else float(self.ret_scale)


@dataclass(frozen=True)
class BlockageParams:
    beta: float

    def __post_init__(self):
        _positive("beta", self.beta)


@dataclass(frozen=True)
class AntennaConfig:
    """Sectored antennas: main-lobe gain, beamwidth (rad) and front-to-back ratio."""

    G_BTx: float
    G_BRx: float
    G_URx: float
    theta_BTx: float
    theta_BRx: float
    theta_URx: float
    xi_BTx: float
    xi_BRx: float
    xi_URx: float

    def __post_init__(self):
        for name in ("G_BTx", "G_BRx", "G_URx"):
            _positive(name, getattr(self, name))
        for name in ("theta_BTx", "theta_BRx", "theta_URx"):
            v = getattr(self, name)
            if not (0 < v <= 2 * math.pi):
                raise ValueError(f"{name} must lie in (0, 2 pi], got {v}")
        for name in ("xi_BTx", "xi_BRx", "xi_URx"):
            v = getattr(self, name)
            if not (0 < v <= 1):
                raise ValueError(f"{name} must lie in (0, 1], got {v}")

    @property
    def p_B(self) -> float:
        return self.theta_BTx / (2 * math.pi)

    @property
    def p_U(self) -> float:
        return self.theta_URx / (2 * math.pi)


@dataclass(frozen=True)
class FadingOrders:
    N_L: int
    N_N: int

    def __post_init__(self):
        for name in ("N_L", "N_N"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {v}")


@dataclass(frozen=True)
class NetworkParams:
    """Everything the analytic bounds and the simulator need about the network."""

    lam_b: float
    pathloss: PathLossParams
    blockage: BlockageParams
    antenna: AntennaConfig
    fading: FadingOrders
    sigma_n: float
    f_c: float = 75e9
    extras: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        _positive("lam_b", self.lam_b)
        _positive("sigma_n", self.sigma_n)

    # derived quantities are properties so they can never go stale
    @property
    def nu_com(self) -> float:
        return self.sigma_n / (self.antenna.G_BTx * self.antenna.G_URx)

    @property
    def nu_rad(self) -> float:
        return self.sigma_n / (self.antenna.G_BTx * self.antenna.G_BRx)

    @property
    def beta(self) -> float:
        return self.blockage.beta

    @property
    def r_c(self) -> float:
        return math.sqrt(1.0 / (math.pi * self.lam_b))

    def with_rc(self, r_c: float) -> "NetworkParams":
        _positive("r_c", r_c)
        return replace(self, lam_b=1.0 / (math.pi * r_c * r_c))

    def with_beta(self, beta: float) -> "NetworkParams":
        return replace(self, blockage=BlockageParams(beta))

    def with_pathloss(self, **kw) -> "NetworkParams":
        return replace(self, pathloss=replace(self.pathloss, **kw))

    # --- deterministic model functions --------------------------------
    def g_los(self, r):
        pl = self.pathloss
        return _clamped_gain(r, pl.K_L, pl.alpha_L, pl.gamma_L)

    def g_nlos(self, r):
        pl = self.pathloss
        return _clamped_gain(r, pl.K_N, pl.alpha_N, pl.gamma_N)

    def g_ret(self, r):
        pl = self.pathloss
        return _clamped_gain(r, pl.K_ret, 2 * pl.alpha_L, 2 * pl.gamma_L)

    def p_los(self, r):
        r = np.asarray(r, dtype=float)
        out = np.exp(-self.beta * r)
        return float(out) if out.ndim == 0 else out

    def beam_gain_pmfs(self) -> dict[str, list[tuple[float, float]]]:
        """Support points and probabilities of the BS transmit and UE receive beam gains."""
        a = self.antenna
        return {
            "B": _two_point_pmf(a.p_B, a.xi_BTx),
            "Z_U": _two_point_pmf(a.p_U, a.xi_URx),
        }


def _two_point_pmf(p_main: float, xi: float) -> list[tuple[float, float]]:
    p_main = min(max(p_main, 0.0), 1.0)
    if xi == 1.0 or p_main == 1.0:
        return [(1.0, 1.0)]
    return [(1.0, p_main), (xi, 1.0 - p_main)]


def _clamped_gain(r, K: float, alpha: float, gamma: float):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise ValueError("path gain needs r > 0")
    raw = K * r ** (-alpha) * np.exp(-gamma * r)
    out = np.where(raw <= 1.0, raw, 0.0)
    return float(out) if out.ndim == 0 else out


def raw_gain(r, K: float, alpha: float, gamma: float):
    """Unclamped ``K r^-alpha exp(-gamma r)``."""
    r = np.asarray(r, dtype=float)
    out = K * r ** (-alpha) * np.exp(-gamma * r)
    return float(out) if out.ndim == 0 else out


def unit_gain_distance(K: float, alpha: float, gamma: float) -> float:
    """Distance at which ``K r^-alpha e^(-gamma r)`` equals one (0 if it never does)."""
    if K <= 0:
        return 0.0
    # the raw gain is decreasing, so solve alpha ln r + gamma r = ln K
    target = math.log(K)
    lo, hi = 1e-300, 1.0
    h = lambda r: alpha * math.log(r) + gamma * r - target
    while h(hi) < 0:
        hi *= 2.0
    if h(lo) > 0:
        return 0.0
    lo = hi / 2.0
    while h(lo) > 0:
        lo /= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


def default_params(r_c: float = 100.0, beta_inv: float = 140.0) -> NetworkParams:
    """Reference parameter set: 75 GHz carrier, 5 degree BS beams, 30 degree UE beam."""
    _positive("r_c", r_c)
    _positive("beta_inv", beta_inv)
    deg = math.pi / 180.0
    pl = PathLossParams(
        K_L=db2lin(-75.96), K_N=db2lin(-90.96),
        alpha_L=2.0, alpha_N=3.2, gamma_L=5e-6, gamma_N=5e-3,
    )
    ant = AntennaConfig(
        G_BTx=db2lin(31.0), G_BRx=db2lin(19.8), G_URx=db2lin(13.2),
        theta_BTx=5 * deg, theta_BRx=5 * deg, theta_URx=30 * deg,
        xi_BTx=db2lin(-35.0), xi_BRx=db2lin(-20.0), xi_URx=db2lin(-15.0),
    )
    p_t_dbm, p_n_dbm = 15.0, -123.2
    return NetworkParams(
        lam_b=1.0 / (math.pi * r_c * r_c),
        pathloss=pl,
        blockage=BlockageParams(1.0 / beta_inv),
        antenna=ant,
        fading=FadingOrders(N_L=3, N_N=2),
        sigma_n=db2lin(p_n_dbm - p_t_dbm),
        f_c=75e9,
    )


# name kept for callers of the original API
default_params_sec7 = default_params
