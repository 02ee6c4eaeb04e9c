"""User drops, LOS blockage thinning and the LOS interferer point process."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .config import DistanceLaw, SystemConfig


@dataclass
class UserDrop:
    """One realized user.

    Attributes:
        distance_km: Distance to the base station.
        angle_norm: Normalized angle of arrival in [-1, 1].
        is_los: LOS flag, ``None`` until :func:`assign_los` runs.
        tx_power: Transmit power in mW under path-loss inversion.
    """

    distance_km: float
    angle_norm: float
    is_los: bool | None = None
    tx_power: float = 0.0


def draw_distances(rng: np.random.Generator, n: int, radius_km: float, law: DistanceLaw) -> np.ndarray:
    u = rng.random(n)
    if law is DistanceLaw.UNIFORM_AREA:
        return radius_km * np.sqrt(u)
    return radius_km * u


def draw_angles(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, n)


def tx_power_mw(cfg: SystemConfig, distance_km: np.ndarray | float) -> np.ndarray | float:
    """Path-loss inversion: received power equals rho for a unit-gain LOS link."""
    return cfg.rho_mw * np.asarray(distance_km) ** cfg.pathloss_alpha


def sample_users(cfg: SystemConfig, intensity: float, rng: np.random.Generator) -> list[UserDrop]:
    """Drop a Poisson number of users with mean ``intensity * pi * R^2`` in the cell."""
    mean_count = intensity * math.pi * cfg.cell_radius_km**2
    n = int(rng.poisson(mean_count)) if mean_count > 0 else 0
    dist = draw_distances(rng, n, cfg.cell_radius_km, cfg.distance_law)
    ang = draw_angles(rng, n)
    power = tx_power_mw(cfg, dist)
    return [UserDrop(float(d), float(a), None, float(p)) for d, a, p in zip(dist, ang, power)]


def los_probability(beta: float, distance_km: np.ndarray | float) -> np.ndarray | float:
    return np.exp(-beta * np.asarray(distance_km))


def assign_los(users: list[UserDrop], beta: float, rng: np.random.Generator) -> list[UserDrop]:
    """Mark each user LOS independently with probability exp(-beta * distance)."""
    if not users:
        return users
    dist = np.array([u.distance_km for u in users])
    los = rng.random(len(users)) < los_probability(beta, dist)
    for user, flag in zip(users, los):
        user.is_los = bool(flag)
    return users


def mean_measure(lambda_a: float, beta: float, r: float) -> float:
    """Expected number of LOS users within distance ``r`` of the base station.

    Integrates the thinned density ``lambda_a * exp(-beta * |x|)`` over the
    disc of radius ``r``.
    """
    x = beta * r
    # 1 - e^{-x}(1 + x); the series avoids cancellation for small x
    if x < 1e-3:
        bracket = x * x / 2.0 - x**3 / 3.0 + x**4 / 8.0
    else:
        bracket = -math.expm1(-x) - x * math.exp(-x)
    return 2.0 * math.pi * lambda_a / beta**2 * bracket


def poisson_pmf(mean: float, n: np.ndarray | int) -> np.ndarray:
    """Poisson pmf evaluated in log space so that large ``n`` does not overflow."""
    n = np.asarray(n, dtype=float)
    if mean == 0.0:
        return (n == 0).astype(float)
    return np.exp(n * math.log(mean) - mean - gammaln(n + 1.0))


def interferer_count_pmf(lambda_a: float, beta: float, radius_km: float, activity_fraction: float, n) -> np.ndarray:
    """Probability of ``n`` LOS interferers in the cell when a fraction of users is still active."""
    mu = activity_fraction * mean_measure(lambda_a, beta, radius_km)
    return poisson_pmf(mu, n)


def poisson_truncation(mean: float, tol: float = 1e-12) -> int:
    """Smallest N with P(X <= N) >= 1 - tol, capped at 10 * mean + 50."""
    if mean <= 0.0:
        return 0
    return min(int(poisson.isf(tol, mean)), int(math.ceil(10.0 * mean + 50.0)))
