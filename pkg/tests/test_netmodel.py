import math

import numpy as np
import pytest

from jcasnet.netmodel import (AntennaConfig, FadingOrders, PathLossParams, db2lin, default_params, lin2db,
                              raw_gain, unit_gain_distance)


def test_db_round_trip():
    x = np.array([1e-12, 0.5, 1.0, 3e7])
    assert lin2db(db2lin(lin2db(x))) == pytest.approx(lin2db(x), rel=1e-13)
    assert db2lin(-30.0) == pytest.approx(1e-3, rel=1e-14)


def test_reference_parameters(params):
    assert params.r_c == pytest.approx(100.0, rel=1e-14)
    assert params.beta == pytest.approx(1 / 140.0, rel=1e-14)
    assert params.antenna.p_B == pytest.approx(5 / 360, rel=1e-14)
    # noise over transmit power minus antenna gains
    assert lin2db(params.nu_com) == pytest.approx(-123.2 - 15 - 31 - 13.2, abs=1e-9)
    assert lin2db(params.nu_rad) == pytest.approx(-123.2 - 15 - 31 - 19.8, abs=1e-9)


def test_gains_and_clamp(params):
    pl = params.pathloss
    r = np.array([50.0, 200.0])
    assert params.g_los(r) == pytest.approx(pl.K_L * r ** -2 * np.exp(-pl.gamma_L * r), rel=1e-14)
    assert params.g_nlos(r) == pytest.approx(pl.K_N * r ** -3.2 * np.exp(-pl.gamma_N * r), rel=1e-14)
    want = pl.K_L / (4 * math.pi) * 1e-4 * math.exp(-2 * pl.gamma_L * 100)
    assert params.g_ret(100.0) == pytest.approx(want, rel=1e-13)
    d0 = unit_gain_distance(pl.K_L, pl.alpha_L, pl.gamma_L)
    assert raw_gain(d0, pl.K_L, pl.alpha_L, pl.gamma_L) == pytest.approx(1.0, rel=1e-12)
    # inside the unit-gain distance the clamp zeroes the gain
    assert params.g_los(0.5 * d0) == 0.0
    with pytest.raises(ValueError):
        params.g_los(0.0)


def test_p_los(params):
    assert params.p_los(140.0) == pytest.approx(math.exp(-1.0), rel=1e-14)


def test_with_helpers(params):
    p = params.with_rc(50.0).with_beta(0.02)
    assert p.r_c == pytest.approx(50.0) and p.beta == 0.02
    assert params.with_pathloss(alpha_L=2.4).pathloss.alpha_L == 2.4


def test_beam_pmfs(params):
    pm = params.beam_gain_pmfs()
    for key in ("B", "Z_U"):
        assert sum(p for _, p in pm[key]) == pytest.approx(1.0)


@pytest.mark.parametrize("kw", [dict(K_N=1.0), dict(alpha_N=1.5), dict(gamma_L=-1.0), dict(K_L=0.0)])
def test_pathloss_validation(kw):
    base = dict(K_L=1e-8, K_N=1e-9, alpha_L=2.0, alpha_N=3.0, gamma_L=0.0, gamma_N=0.0)
    base.update(kw)
    with pytest.raises(ValueError):
        PathLossParams(**base)


def test_antenna_and_fading_validation():
    ok = dict(G_BTx=1.0, G_BRx=1.0, G_URx=1.0, theta_BTx=0.1, theta_BRx=0.1, theta_URx=0.1,
              xi_BTx=0.1, xi_BRx=0.1, xi_URx=0.1)
    AntennaConfig(**ok)
    with pytest.raises(ValueError):
        AntennaConfig(**{**ok, "xi_BTx": 1.5})
    with pytest.raises(ValueError):
        AntennaConfig(**{**ok, "theta_URx": 7.0})
    with pytest.raises(ValueError):
        FadingOrders(0, 1)
    with pytest.raises(ValueError):
        default_params(r_c=-1.0)
