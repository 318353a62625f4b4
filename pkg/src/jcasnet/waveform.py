"""Multicarrier radar allocation, Fisher weights and the estimation-rate bracket."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .netmodel import C0


@dataclass(frozen=True)
class Numerology:
    """Multicarrier numerology; ``T_s = 1/delta_f`` and ``T_MC = T_s + T_g``."""

    delta_f: float
    T_g: float
    f_c: float
    N_s: int = 1
    N_c: int = 1

    def __post_init__(self):
        if not (self.delta_f > 0 and math.isfinite(self.delta_f)):
            raise ValueError("subcarrier spacing must be positive")
        if not self.T_g >= 0:
            raise ValueError("guard interval must be non-negative")
        if not self.f_c > 0:
            raise ValueError("carrier frequency must be positive")
        if self.N_s < 1 or self.N_c < 1:
            raise ValueError("grid dimensions must be at least 1")

    @property
    def T_s(self) -> float:
        return 1.0 / self.delta_f

    @property
    def T_MC(self) -> float:
        return self.T_s + self.T_g


def nr_numerology3(f_c: float = 75e9) -> Numerology:
    """120 kHz spacing with a 570 ns guard interval."""
    return Numerology(delta_f=120e3, T_g=570e-9, f_c=f_c)


@dataclass(frozen=True)
class ResourceGrid:
    """Resource elements used for sensing, as parallel symbol/subcarrier index arrays."""

    m: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=np.int64).ravel()
        n = np.asarray(self.n, dtype=np.int64).ravel()
        if m.shape != n.shape:
            raise ValueError("symbol and subcarrier index arrays differ in length")
        if m.size and (m.min() < 0 or n.min() < 0):
            raise ValueError("grid indices must be non-negative")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n", n)

    def __len__(self) -> int:
        return int(self.m.size)

    @classmethod
    def from_pairs(cls, pairs) -> "ResourceGrid":
        arr = np.asarray(sorted(set(map(tuple, pairs))), dtype=np.int64).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])


def comb_grid(N_s: int, N_c: int, dN_s: int, dN_c: int) -> ResourceGrid:
    """Every ``dN_s``-th symbol on every ``dN_c``-th subcarrier of an ``N_s x N_c`` grid."""
    if min(N_s, N_c, dN_s, dN_c) < 1:
        raise ValueError("comb dimensions and strides must be at least 1")
    mm, nn = np.meshgrid(np.arange(0, N_s, dN_s), np.arange(0, N_c, dN_c), indexing="ij")
    return ResourceGrid(mm.ravel(), nn.ravel())


def comb_strides(delta_r: float, delta_v: float, r_max: float, v_max: float,
                 num: Numerology) -> tuple[int, int, int, int]:
    """``(N_s, N_c, dN_s, dN_c)`` from range/velocity resolution and ambiguity targets.

    Range resolution ``c0 / (2 N_c delta_f)`` and velocity resolution
    ``c0 / (2 f_c T_MC N_s)`` fix the spans; the unambiguous range
    ``c0 / (2 dN_c delta_f)`` and unambiguous velocity span
    ``c0 / (2 f_c T_MC dN_s) >= 2 v_max`` fix the strides.
    """
    for name, v in (("delta_r", delta_r), ("delta_v", delta_v), ("r_max", r_max), ("v_max", v_max)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    df, tmc, fc = num.delta_f, num.T_MC, num.f_c
    N_c = int(math.ceil(C0 / (2.0 * delta_r * df) - 1e-9))
    N_s = int(math.ceil(C0 / (2.0 * fc * tmc * delta_v) - 1e-9))
    dN_c = 1 if math.isinf(r_max) else max(1, int(math.floor(C0 / (2.0 * r_max * df) + 1e-9)))
    dN_s = 1 if math.isinf(v_max) else max(1, int(math.floor(C0 / (4.0 * fc * tmc * v_max) + 1e-9)))
    return N_s, N_c, dN_s, dN_c


def comb_allocation(delta_r: float, delta_v: float, r_max: float, v_max: float,
                    num: Numerology) -> ResourceGrid:
    return comb_grid(*comb_strides(delta_r, delta_v, r_max, v_max, num))


@dataclass(frozen=True)
class PriorCov:
    """2x2 prior covariance of (range, velocity) and its symmetric square root."""

    Q: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float)
        if Q.shape != (2, 2):
            raise ValueError("prior covariance must be 2x2")
        if not np.allclose(Q, Q.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(Q).max())):
            raise ValueError("prior covariance must be symmetric")
        Q = 0.5 * (Q + Q.T)
        ev = np.linalg.eigvalsh(Q)
        if ev.min() < -1e-12 * max(1.0, ev.max()):
            raise ValueError("prior covariance must be positive semi-definite")
        object.__setattr__(self, "Q", Q)

    @property
    def sqrt(self) -> np.ndarray:
        ev, V = np.linalg.eigh(self.Q)
        return (V * np.sqrt(np.maximum(ev, 0.0))) @ V.T

    @classmethod
    def identity(cls) -> "PriorCov":
        return cls(np.eye(2))


def fisher_constants(num: Numerology) -> tuple[float, float]:
    """``k1 = 2 delta_f / c0`` and ``k2 = 2 T_MC f_c / c0``."""
    return 2.0 * num.delta_f / C0, 2.0 * num.T_MC * num.f_c / C0


def _element_info(grid: ResourceGrid, Q: PriorCov, k1: float, k2: float) -> np.ndarray:
    S = Q.sqrt
    n = grid.n.astype(float)
    m = grid.m.astype(float)
    a = k1 * S[0, 0] * n - k2 * S[0, 1] * m
    b = k1 * S[0, 1] * n - k2 * S[1, 1] * m
    return 8.0 * math.pi ** 2 * (a * a + b * b)


def fisher_weights(grid: ResourceGrid, Q: PriorCov, k1: float, k2: float) -> tuple[float, np.ndarray]:
    """Processing gain ``G`` and per-element weights ``eta`` (aligned with ``grid``)."""
    if len(grid) == 0:
        raise ValueError("empty sensing allocation")
    info = _element_info(grid, Q, k1, k2)
    G = float(info.sum())
    if not G > 0:
        raise ValueError("degenerate allocation: zero Fisher information")
    return G, info / G


def fisher_matrix(grid: ResourceGrid, k1: float, k2: float, sinr: Optional[np.ndarray] = None) -> np.ndarray:
    """Fisher information of (range, velocity) for unit-modulus symbols."""
    w = np.ones(len(grid)) if sinr is None else np.asarray(sinr, dtype=float)
    n = grid.n.astype(float)
    m = grid.m.astype(float)
    J = np.empty((2, 2))
    J[0, 0] = np.sum(w * (k1 * n) ** 2)
    J[1, 1] = np.sum(w * (k2 * m) ** 2)
    J[0, 1] = J[1, 0] = -np.sum(w * k1 * k2 * m * n)
    return 8.0 * math.pi ** 2 * J


@dataclass(frozen=True)
class ReducedAllocation:
    """Slot-by-subcarrier weights with their marginals.

    ``theta[t, n]`` is the total Fisher weight of the sensing elements in slot
    ``slots[t]`` on subcarrier ``subcarriers[n]``.
    """

    theta: np.ndarray
    slots: np.ndarray
    subcarriers: np.ndarray
    G: float

    @property
    def w(self) -> np.ndarray:
        return self.theta.sum(axis=1)

    @property
    def q(self) -> np.ndarray:
        return self.theta.sum(axis=0)

    @property
    def T(self) -> int:
        return int(self.theta.shape[0])

    @property
    def N(self) -> int:
        return int(self.theta.shape[1])

    @classmethod
    def single(cls, G: float = 1.0) -> "ReducedAllocation":
        """One slot, one subcarrier: the single-element allocation."""
        return cls(np.ones((1, 1)), np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64), G)


def reduce_allocation(grid: ResourceGrid, eta: np.ndarray, slot_len: int, G: float = float("nan")) -> ReducedAllocation:
    """Aggregate element weights into slots of ``slot_len`` symbols."""
    if slot_len < 1:
        raise ValueError("slot_len must be at least 1")
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (len(grid),):
        raise ValueError("eta must align with the grid")
    t = grid.m // slot_len
    slots, ti = np.unique(t, return_inverse=True)
    subs, ni = np.unique(grid.n, return_inverse=True)
    theta = np.zeros((slots.size, subs.size))
    np.add.at(theta, (ti, ni), eta)
    return ReducedAllocation(theta, slots, subs, float(G))


def build_allocation(grid: ResourceGrid, num: Numerology, Q: Optional[PriorCov] = None,
                     slot_len: int = 14) -> ReducedAllocation:
    k1, k2 = fisher_constants(num)
    G, eta = fisher_weights(grid, Q or PriorCov.identity(), k1, k2)
    return reduce_allocation(grid, eta, slot_len, G)


def est_rate_sandwich(G: float, x: float) -> tuple[float, float]:
    """Bits per CPI: ``(0.5 log2(1 + G x), log2(1 + G x / 2))``."""
    if x < 0 or G < 0:
        raise ValueError("G and x must be non-negative")
    gx = G * x
    return 0.5 * math.log1p(gx) / math.log(2), math.log1p(0.5 * gx) / math.log(2)


def estimation_rate(Q: PriorCov, J: np.ndarray) -> float:
    """``0.5 log2 det(I + Q^1/2 J Q^1/2)`` in bits, from the eigenvalues of the inner matrix."""
    J = np.asarray(J, dtype=float)
    if J.shape != (2, 2):
        raise ValueError("Fisher matrix must be 2x2")
    S = Q.sqrt
    A = S @ J @ S
    ev = np.maximum(np.linalg.eigvalsh(0.5 * (A + A.T)), 0.0)
    return 0.5 * float(np.sum(np.log1p(ev))) / math.log(2)
