"""Closed-form latent access failure probability for reactive and K-repetition HARQ.

The chain is: Poisson count of LOS interferers on the typical user's
subcarrier, preamble-collision probability, LOS probability of the typical
user, and a conditional SINR success probability that replaces the Fejer
kernel by its quadratic main-lobe model. Per-attempt success probabilities
then drive the active-fraction recursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import harq, spatial
from .config import HarqScheme, LosResample, SystemConfig, active_intensity

POISSON_TAIL_TOL = 1e-12


def no_collision_prob(n, n_preambles: int):
    """Probability that none of ``n`` other users picked the typical user's preamble."""
    if n_preambles < 1:
        raise ValueError("n_preambles must be >= 1")
    return (1.0 - 1.0 / n_preambles) ** np.asarray(n, dtype=float)


def los_prob_typical(beta: float, radius_km: float) -> float:
    """LOS probability of a user at a Uniform(0, R) distance: (1 - e^{-bR}) / (bR)."""
    x = beta * radius_km
    if x < 1e-8:
        return 1.0 - x / 2.0
    return -math.expm1(-x) / x


def mainlobe_factor(gamma: float) -> float:
    """Mean of 1 / (1 + gamma (1 - u^2)) for u ~ Uniform(0, 1).

    This is the Laplace-transform factor contributed by one interferer that
    falls inside the typical user's main lobe.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if gamma < 1e-6:
        return 1.0 - 2.0 * gamma / 3.0
    return math.atanh(math.sqrt(gamma / (1.0 + gamma))) / math.sqrt(gamma * (1.0 + gamma))


def noise_success(K: int, gamma: float, rho: float, sigma2: float) -> float:
    """P(|g|^2 >= gamma sigma^2 / (rho K)) for unit-mean exponential |g|^2."""
    return math.exp(-gamma * sigma2 / (rho * K))


def _binomial_weights(n: int, p: float) -> np.ndarray:
    k = np.arange(n + 1, dtype=float)
    log_c = gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)
    with np.errstate(divide="ignore"):
        log_w = log_c + k * math.log(p) + (n - k) * math.log1p(-p)
    return np.exp(log_w)


def _check_antennas(K: int) -> None:
    if K < 3:
        raise ValueError(f"main-lobe probability 2/K needs K >= 3, got K={K}")


def conditional_success_reactive(n: int, K: int, gamma: float, rho: float, sigma2: float) -> float:
    """Success probability of one transmission given no collision, LOS and ``n`` interferers.

    Each interferer lands in the main lobe with probability 2/K; the
    in-lobe count is binomial and every in-lobe interferer multiplies the
    success probability by :func:`mainlobe_factor`.
    """
    _check_antennas(K)
    if n < 0:
        raise ValueError("n must be >= 0")
    w = _binomial_weights(n, 2.0 / K)
    q = mainlobe_factor(gamma) ** np.arange(n + 1)
    return float(noise_success(K, gamma, rho, sigma2) * math.fsum(w * q))


def conditional_success_krep(n: int, K: int, gamma: float, rho: float, sigma2: float, k_rep: int) -> float:
    """Success probability of a K-repetition attempt given no collision, LOS and ``n`` interferers.

    Inclusion-exclusion over the ``k_rep`` repetitions, with the in-lobe
    interferer count shared by all repetitions of the attempt. The
    alternating series is accumulated with ``math.fsum``.
    """
    _check_antennas(K)
    if k_rep < 1:
        raise ValueError(f"k_rep must be >= 1, got {k_rep}")
    if n < 0:
        raise ValueError("n must be >= 0")
    w = _binomial_weights(n, 2.0 / K)
    q = mainlobe_factor(gamma)
    e = noise_success(K, gamma, rho, sigma2)
    nn = np.arange(n + 1)
    terms = []
    for l in range(1, k_rep + 1):
        sign = 1.0 if l % 2 else -1.0
        terms.extend(sign * math.comb(k_rep, l) * e**l * w * q ** (l * nn))
    return math.fsum(terms)


def _interferer_mixture(activity: float, cfg: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Counts 0..N* and their Poisson weights for the LOS interferer count."""
    if not 0.0 <= activity <= 1.0:
        raise ValueError(f"activity fraction must lie in [0, 1], got {activity}")
    mu = activity * spatial.mean_measure(active_intensity(cfg), cfg.blockage_beta, cfg.cell_radius_km)
    n_max = spatial.poisson_truncation(mu, POISSON_TAIL_TOL)
    ns = np.arange(n_max + 1)
    return ns, spatial.poisson_pmf(mu, ns)


def attempt_success_reactive(activity: float, cfg: SystemConfig) -> float:
    """Probability that a reactive attempt is decoded when a fraction ``activity`` of users is active."""
    ns, pmf = _interferer_mixture(activity, cfg)
    p_los = los_prob_typical(cfg.blockage_beta, cfg.cell_radius_km)
    cond = np.array(
        [conditional_success_reactive(int(n), cfg.n_antennas, cfg.gamma, cfg.rho_mw, cfg.noise_mw) for n in ns]
    )
    return float(math.fsum(pmf * no_collision_prob(ns, cfg.collision_resources) * p_los * cond))


def attempt_success_krep(activity: float, cfg: SystemConfig, k_rep: int) -> float:
    """K-repetition attempt success with LOS, collision and interferers fixed over the attempt."""
    ns, pmf = _interferer_mixture(activity, cfg)
    p_los = los_prob_typical(cfg.blockage_beta, cfg.cell_radius_km)
    cond = np.array(
        [
            conditional_success_krep(int(n), cfg.n_antennas, cfg.gamma, cfg.rho_mw, cfg.noise_mw, k_rep)
            for n in ns
        ]
    )
    return float(math.fsum(pmf * no_collision_prob(ns, cfg.collision_resources) * p_los * cond))


def attempt_success(activity: float, cfg: SystemConfig, scheme: HarqScheme) -> float:
    """Per-attempt success for ``scheme`` under ``cfg.los_resample``.

    With ``PER_TTI`` every repetition redraws LOS state, subcarrier and
    preamble, so the repetitions of one attempt are independent copies of a
    reactive transmission at the same active fraction.
    """
    if scheme.is_reactive:
        return attempt_success_reactive(activity, cfg)
    if cfg.los_resample is LosResample.PER_TTI:
        p = attempt_success_reactive(activity, cfg)
        return -math.expm1(scheme.k_rep * math.log1p(-p)) if p < 1.0 else 1.0
    return attempt_success_krep(activity, cfg, scheme.k_rep)


@dataclass
class AttemptSeries:
    """Active fractions, per-attempt success and the resulting failure probability."""

    scheme: HarqScheme
    tau: int
    activity: list[float] = field(default_factory=list)
    success: list[float] = field(default_factory=list)
    lafp: float = 1.0

    @property
    def n_attempts(self) -> int:
        return len(self.activity)


def attempt_recursion(scheme: HarqScheme, cfg: SystemConfig, n_attempts: int) -> tuple[list[float], list[float]]:
    """Active fraction and success probability of attempts 1..n_attempts.

    The active fraction follows A_1 = 1 and A_{m+1} = 1 - sum_{i<=m} A_i P_i,
    evaluated as A_{m+1} = A_m (1 - P_m) so that it stays accurate when the
    remaining fraction is far below machine epsilon.
    """
    activity: list[float] = []
    success: list[float] = []
    a = 1.0
    for _ in range(n_attempts):
        p = attempt_success(a, cfg, scheme)
        activity.append(a)
        success.append(p)
        a = a * (1.0 - p)
    return activity, success


def lafp(scheme: HarqScheme, tau: int, cfg: SystemConfig) -> AttemptSeries:
    """Latent access failure probability within ``tau`` TTIs."""
    m_max = harq.max_attempts(scheme, tau, cfg)
    series = AttemptSeries(scheme, tau)
    if m_max == 0:
        return series
    series.activity, series.success = attempt_recursion(scheme, cfg, m_max)
    series.lafp = series.activity[-1] * (1.0 - series.success[-1])
    return series


def lafp_curve(scheme: HarqScheme, taus, cfg: SystemConfig) -> np.ndarray:
    """Failure probability over a grid of deadlines, sharing one attempt recursion."""
    taus = [int(t) for t in taus]
    if not taus:
        return np.empty(0)
    attempts = [harq.max_attempts(scheme, t, cfg) for t in taus]
    activity, success = attempt_recursion(scheme, cfg, max(attempts))
    remaining = [1.0] + [a * (1.0 - p) for a, p in zip(activity, success)]
    return np.array([remaining[m] for m in attempts])
