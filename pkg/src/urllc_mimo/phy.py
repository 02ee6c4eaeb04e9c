"""Array response, Fejer-kernel beamforming gain and the post-beamforming SINR."""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .config import SystemConfig


def array_response_dot(K: int, theta_j: float, theta_i: float) -> complex:
    """Inner product a(theta_j)^H a(theta_i) of two unit-norm ULA steering vectors."""
    k = np.arange(K)
    return complex(np.exp(1j * np.pi * k * (theta_j - theta_i)).sum() / K)


def wrap_angle_difference(delta_theta):
    """Map an angle difference onto [-1, 1); the Fejer kernel has period 2."""
    return np.mod(np.asarray(delta_theta, dtype=float) + 1.0, 2.0) - 1.0


def fejer_gain(K: int, delta_theta):
    """Beamforming gain F_K between two normalized angles ``delta_theta`` apart.

    Equals ``K * |a(theta_j)^H a(theta_i)|^2``; peaks at K for zero offset and
    has nulls at every non-zero multiple of 2/K.
    """
    d = wrap_angle_difference(delta_theta)
    half = 0.5 * np.pi * d
    den = np.sin(half)
    small = np.abs(d) < 1e-7
    safe_den = np.where(small, 1.0, den)
    ratio = np.sin(K * half) / safe_den
    out = ratio * ratio / K
    # second-order expansion around the main-lobe peak
    series = K - K * (K * K - 1.0) * half * half / 3.0
    out = np.where(small, series, out)
    return out if out.ndim else float(out)


def fejer_quadratic_approx(K: int, delta_theta):
    """Quadratic main-lobe model of the Fejer kernel, zero outside |delta| < 2/K."""
    d = wrap_angle_difference(delta_theta)
    out = np.where(np.abs(d) <= 2.0 / K, K - K**3 * d * d / 4.0, 0.0)
    return out if out.ndim else float(out)


def sinr(
    cfg: SystemConfig,
    own_gain_sq: float,
    los_ok: bool,
    no_collision: bool,
    interferers: Iterable[tuple[float, float]],
    gain: Callable = fejer_gain,
) -> float:
    """Post-beamforming SINR of one user.

    Args:
        own_gain_sq: |g_0|^2 of the intended user.
        los_ok: Whether the intended user has a LOS link.
        no_collision: Whether its preamble was unique on the subcarrier.
        interferers: ``(|g_i|^2, delta_theta_i)`` for every other LOS user on
            the same subcarrier.
        gain: Beamforming gain model, exact Fejer kernel by default.
    """
    K = cfg.n_antennas
    rho = cfg.rho_mw
    interference = 0.0
    for g_sq, dtheta in interferers:
        interference += rho * g_sq * float(gain(K, dtheta))
    if not (los_ok and no_collision):
        return 0.0
    return rho * K * own_gain_sq / (interference + cfg.noise_mw)
