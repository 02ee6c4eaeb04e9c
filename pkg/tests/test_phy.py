import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, optimize

import oracles
from urllc_mimo import phy
from urllc_mimo.config import SystemConfig

angles = st.floats(-1.0, 1.0, allow_nan=False)


@given(st.integers(1, 512), angles, angles)
def test_fejer_equals_scaled_array_correlation(K, a, b):
    dot = phy.array_response_dot(K, a, b)
    assert K * abs(dot) ** 2 == pytest.approx(phy.fejer_gain(K, a - b), abs=1e-10 * K)


@given(st.integers(1, 300), st.floats(-3, 3, allow_nan=False))
def test_fejer_matches_direct_sum_oracle(K, d):
    assert phy.fejer_gain(K, d) == pytest.approx(oracles.fejer_direct(K, d), abs=1e-9 * K)


@pytest.mark.parametrize("K", [8, 64, 256])
def test_fejer_peak_and_nulls(K):
    assert phy.fejer_gain(K, 0.0) == K
    m = np.arange(1, K)
    assert np.max(np.abs(phy.fejer_gain(K, 2.0 * m / K))) < 1e-9


@given(st.integers(2, 256), st.floats(-1, 1), st.integers(-3, 3))
def test_fejer_period_two(K, d, shift):
    assert phy.fejer_gain(K, d + 2 * shift) == pytest.approx(phy.fejer_gain(K, d), abs=1e-8 * K)


def test_fejer_smooth_through_series_branch():
    K = 256
    assert phy.fejer_gain(K, 0.99e-7) == pytest.approx(phy.fejer_gain(K, 1.01e-7), rel=1e-9)


def test_quadratic_approx_examples():
    assert phy.fejer_quadratic_approx(100, 0.0) == 100
    assert phy.fejer_quadratic_approx(100, 0.01) == pytest.approx(75.0)
    assert phy.fejer_quadratic_approx(100, 0.02) == pytest.approx(0.0, abs=1e-12)
    assert phy.fejer_quadratic_approx(100, 0.5) == 0.0


def _limiting_lobe_error():
    # large-K shape: F_K(2u/K)/K -> sinc(u)^2 against the quadratic 1 - u^2, u in [0, 1]
    res = optimize.minimize_scalar(lambda u: -(1 - u * u - np.sinc(u) ** 2), bounds=(0, 1), method="bounded")
    return -res.fun


def test_limiting_lobe_error_value():
    assert _limiting_lobe_error() == pytest.approx(0.3881, abs=1e-4)


@pytest.mark.parametrize("K", [16, 32, 64, 128, 256, 1024])
def test_quadratic_main_lobe_error_is_bounded(K):
    d = np.linspace(-2.0 / K, 2.0 / K, 4001)
    err = np.max(np.abs(phy.fejer_gain(K, d) - phy.fejer_quadratic_approx(K, d))) / K
    assert err <= _limiting_lobe_error() + 1e-6


def test_sinr_indicators_and_noise_limit():
    cfg = SystemConfig()
    clean = cfg.rho_mw * cfg.n_antennas * 2.0 / cfg.noise_mw
    assert phy.sinr(cfg, 2.0, False, True, []) == 0.0
    assert phy.sinr(cfg, 2.0, True, False, []) == 0.0
    assert phy.sinr(cfg, 2.0, True, True, []) == pytest.approx(clean)
    # interferer sitting on a kernel null adds nothing
    assert phy.sinr(cfg, 2.0, True, True, [(5.0, 2.0 / cfg.n_antennas)]) == pytest.approx(clean, rel=1e-9)


@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(-1, 1))
def test_sinr_nonincreasing_in_interferer_gain(g1, g2, d):
    cfg = SystemConfig(n_antennas=64)
    lo, hi = sorted((g1, g2))
    assert phy.sinr(cfg, 1.0, True, True, [(hi, d)]) <= phy.sinr(cfg, 1.0, True, True, [(lo, d)])


def test_sinr_accepts_quadratic_gain():
    cfg = SystemConfig(n_antennas=64)
    a = phy.sinr(cfg, 1.0, True, True, [(1.0, 0.5)], gain=phy.fejer_quadratic_approx)
    assert a == pytest.approx(cfg.rho_mw * 64 / cfg.noise_mw)


def _sidelobe_energy(K, lo, hi):
    x = np.linspace(lo, hi, 200_001)
    return 2.0 * integrate.simpson(phy.fejer_gain(K, 2.0 * x / math.pi), x=x)


def test_sidelobe_energy_over_one_period_vanishes():
    # in x = pi * dtheta / 2 the kernel has period pi, so one period is |x| <= pi / 2
    vals = [_sidelobe_energy(K, 0.1, math.pi / 2) for K in (8, 32, 128, 512, 2048)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.01


def test_range_up_to_pi_includes_grating_lobe():
    # F_K(pi) = K, so the integral over delta <= |x| <= pi tends to pi rather than 0
    assert _sidelobe_energy(2048, 0.1, math.pi) == pytest.approx(math.pi, rel=0.01)
