"""Per-TTI Monte-Carlo engine for grant-free uplink with HARQ.

Every trial drops users in the cell, gives each one packet at t = 0 and
steps all of them through the HARQ protocol TTI by TTI. In each TTI the
transmitting users draw fading, LOS state, subcarrier and preamble; the
base station flags preamble collisions among LOS users and decodes the
rest with conjugate beamforming (exact Fejer gains) against all other LOS
users on the same subcarrier.

Trials are independent work units. Trial ``i`` draws from a generator
seeded by ``SeedSequence(seed, spawn_key=(i,))``, and per-trial results are
integer counts that are summed, so a run is bit-identical for any number
of worker processes.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import harq, spatial
from .config import HarqScheme, LosResample, SystemConfig
from .phy import fejer_gain

# HARQ phases in the vectorized engine; same meaning as harq.Phase
IDLE, ARRIVAL, TX, WAIT, DONE = range(5)

COUNTERS = ("active", "transmitting", "nlos", "collided", "sinr_failed", "decoded", "ack", "nack")
_C = {name: i for i, name in enumerate(COUNTERS)}

CENSOR_FAILURES = 10


class InsufficientSamples(ValueError):
    """Too few users reached an attempt to estimate its statistics."""

    def __init__(self, attempt: int, count: int, required: int):
        super().__init__(f"attempt {attempt}: {count} user samples, need at least {required}")
        self.attempt = attempt
        self.count = count


@dataclass
class LatencyRecords:
    """Per-user outcome of one trial (arrays indexed by user)."""

    success: np.ndarray
    completion_tti: np.ndarray  # -1 when the packet was not delivered within tau_max
    attempt: np.ndarray  # attempt that was acknowledged, 0 if none


@dataclass
class TrialOutcome:
    records: LatencyRecords
    counters: np.ndarray  # shape (tau_max + 1, len(COUNTERS)); row t = TTI t
    attempt_active: np.ndarray
    attempt_success: np.ndarray

    @property
    def n_users(self) -> int:
        return int(self.records.success.size)


def decode(cfg: SystemConfig, angle, gain_sq, subcarrier, preamble, gain=fejer_gain):
    """Collision flags and SINR test for LOS users transmitting in one TTI.

    Returns ``(collided, sinr_ok)`` boolean arrays aligned with the inputs.
    """
    n = angle.size
    collided = np.zeros(n, dtype=bool)
    sinr_ok = np.zeros(n, dtype=bool)
    if n == 0:
        return collided, sinr_ok

    key = subcarrier.astype(np.int64) * cfg.n_preambles + preamble
    _, key_inv, key_counts = np.unique(key, return_inverse=True, return_counts=True)
    collided = key_counts[key_inv] > 1

    # pad users into a (subcarrier, slot) grid so each subcarrier is one dense block
    order = np.argsort(subcarrier, kind="stable")
    sc_sorted = subcarrier[order]
    _, row, counts = np.unique(sc_sorted, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    col = np.arange(n) - starts[row]
    width = int(counts.max())
    ang = np.zeros((counts.size, width))
    pw = np.zeros((counts.size, width))
    ang[row, col] = angle[order]
    pw[row, col] = gain_sq[order]

    K = cfg.n_antennas
    F = gain(K, ang[:, :, None] - ang[:, None, :])
    idx = np.arange(width)
    F[:, idx, idx] = 0.0
    interference = cfg.rho_mw * np.einsum("rij,rj->ri", F, pw)
    sinr = cfg.rho_mw * K * pw / (interference + cfg.noise_mw)
    ok_sorted = sinr[row, col] >= cfg.gamma
    sinr_ok[order] = ok_sorted
    return collided, sinr_ok


def simulate_trial(
    cfg: SystemConfig,
    scheme: HarqScheme,
    tau_max: int,
    rng: np.random.Generator,
    extra_users: int = 0,
) -> TrialOutcome:
    """Run one trial for ``tau_max`` TTIs."""
    mean_users = cfg.lambda_u * math.pi * cfg.cell_radius_km**2
    n = (int(rng.poisson(mean_users)) if mean_users > 0 else 0) + extra_users
    reps = scheme.repetitions
    rtt = harq.rtt(scheme, cfg)
    n_attempt_slots = max(harq.max_attempts(scheme, tau_max, cfg), 0) + 2

    phase = np.full(n, ARRIVAL, dtype=np.int8)
    next_event = np.full(n, cfg.t_a, dtype=np.int64)
    feedback_tti = np.zeros(n, dtype=np.int64)
    attempt = np.zeros(n, dtype=np.int64)
    rep = np.zeros(n, dtype=np.int64)
    decoded = np.zeros(n, dtype=bool)
    success_tti = np.full(n, -1, dtype=np.int64)
    success_attempt = np.zeros(n, dtype=np.int64)

    # per-user access state, redrawn per repetition or per attempt
    cur_angle = np.zeros(n)
    cur_los = np.zeros(n, dtype=bool)
    cur_sc = np.zeros(n, dtype=np.int64)
    cur_pre = np.zeros(n, dtype=np.int64)

    counters = np.zeros((tau_max + 1, len(COUNTERS)), dtype=np.int64)
    attempt_active = np.zeros(n_attempt_slots, dtype=np.int64)
    attempt_success = np.zeros(n_attempt_slots, dtype=np.int64)
    per_tti = cfg.los_resample is LosResample.PER_TTI

    for t in range(1, tau_max + 1):
        row = counters[t]
        row[_C["active"]] = np.count_nonzero((phase != DONE) & (phase != IDLE))

        tx = np.flatnonzero((phase == TX) & (next_event == t))
        if tx.size:
            redraw = tx if per_tti else tx[rep[tx] == 0]
            if redraw.size:
                m = redraw.size
                dist = spatial.draw_distances(rng, m, cfg.cell_radius_km, cfg.distance_law)
                cur_angle[redraw] = spatial.draw_angles(rng, m)
                cur_los[redraw] = rng.random(m) < spatial.los_probability(cfg.blockage_beta, dist)
                cur_sc[redraw] = rng.integers(0, cfg.n_subcarriers, m)
                cur_pre[redraw] = rng.integers(0, cfg.n_preambles, m)
            fading = rng.exponential(1.0, tx.size)
            los_tx = tx[cur_los[tx]]
            los_fading = fading[cur_los[tx]]
            collided, sinr_ok = decode(cfg, cur_angle[los_tx], los_fading, cur_sc[los_tx], cur_pre[los_tx])
            ok = ~collided & sinr_ok
            decoded[los_tx[ok]] = True

            row[_C["transmitting"]] = tx.size
            row[_C["nlos"]] = tx.size - los_tx.size
            row[_C["collided"]] = np.count_nonzero(collided)
            row[_C["sinr_failed"]] = np.count_nonzero(~collided & ~sinr_ok)
            row[_C["decoded"]] = np.count_nonzero(ok)

            rep[tx] += 1
            last = tx[rep[tx] >= reps]
            more = tx[rep[tx] < reps]
            next_event[more] = t + cfg.t_tx
            phase[last] = WAIT
            next_event[last] = feedback_tti[last]

        fb = np.flatnonzero((phase == WAIT) & (feedback_tti == t))
        if fb.size:
            acked = fb[decoded[fb]]
            nacked = fb[~decoded[fb]]
            phase[acked] = DONE
            success_tti[acked] = t
            success_attempt[acked] = attempt[acked]
            np.add.at(attempt_success, attempt[acked], 1)
            row[_C["ack"]] = acked.size
            row[_C["nack"]] = nacked.size
            _start_attempt(nacked, t + 1, rtt, tau_max, phase, next_event, feedback_tti, attempt, rep, decoded, attempt_active)

        arrived = np.flatnonzero((phase == ARRIVAL) & (next_event == t))
        if arrived.size:
            _start_attempt(arrived, t + 1, rtt, tau_max, phase, next_event, feedback_tti, attempt, rep, decoded, attempt_active)

    records = LatencyRecords(success_tti > 0, success_tti, success_attempt)
    return TrialOutcome(records, counters, attempt_active, attempt_success)


def _start_attempt(users, first_tti, rtt, tau_max, phase, next_event, feedback_tti, attempt, rep, decoded, attempt_active):
    if users.size == 0:
        return
    phase[users] = TX
    attempt[users] += 1
    rep[users] = 0
    decoded[users] = False
    next_event[users] = first_tti
    fb = first_tti - 1 + rtt
    feedback_tti[users] = fb
    if fb <= tau_max:
        np.add.at(attempt_active, attempt[users], 1)


@dataclass
class FailureCurve:
    """Empirical latent access failure probability over deadlines 1..tau_max TTIs."""

    tau: np.ndarray
    failures: np.ndarray  # users not delivered within tau
    n_users: int
    n_trials: int
    tti_ms: float
    attempt_active: np.ndarray = field(repr=False)
    attempt_success: np.ndarray = field(repr=False)
    counters: np.ndarray = field(repr=False)
    completion_hist: np.ndarray = field(repr=False)

    @property
    def point_estimate(self) -> np.ndarray:
        if self.n_users == 0:
            return np.full(self.tau.shape, np.nan)
        return self.failures / self.n_users

    @property
    def censored(self) -> np.ndarray:
        return self.failures < CENSOR_FAILURES

    @property
    def ci_half_width(self) -> np.ndarray:
        return wilson_interval(self.failures, self.n_users)[1]

    @property
    def failure_prob(self) -> np.ndarray:
        """Point estimate, or the Wilson upper bound where the row is censored."""
        centre, half = wilson_interval(self.failures, self.n_users)
        return np.where(self.censored, centre + half, self.point_estimate)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau_ttis", "tau_ms", "failure_prob", "ci_half_width", "n_trials", "n_users", "censored"])
            for t, p, h, c in zip(self.tau, self.failure_prob, self.ci_half_width, self.censored):
                w.writerow([int(t), repr(float(t * self.tti_ms)), repr(float(p)), repr(float(h)), self.n_trials, self.n_users, int(c)])


def wilson_interval(failures, n: int, z: float = 1.959963984540054):
    """Centre and half-width of the Wilson score interval for ``failures / n``."""
    failures = np.asarray(failures, dtype=float)
    if n == 0:
        nan = np.full(failures.shape, np.nan)
        return nan, nan
    p = failures / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return centre, half


def _run_chunk(args) -> tuple:
    cfg, scheme, tau_max, seed, trial_ids, extra_users = args
    hist = np.zeros(tau_max + 1, dtype=np.int64)
    n_users = 0
    n_slots = max(harq.max_attempts(scheme, tau_max, cfg), 0) + 2
    active = np.zeros(n_slots, dtype=np.int64)
    success = np.zeros(n_slots, dtype=np.int64)
    counters = np.zeros((tau_max + 1, len(COUNTERS)), dtype=np.int64)
    for i in trial_ids:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        out = simulate_trial(cfg, scheme, tau_max, rng, extra_users)
        done = out.records.completion_tti[out.records.success]
        hist += np.bincount(done, minlength=tau_max + 1)
        n_users += out.n_users
        active += out.attempt_active
        success += out.attempt_success
        counters += out.counters
    return hist, n_users, active, success, counters


def run_trials(
    cfg: SystemConfig,
    scheme: HarqScheme,
    tau_max: int,
    n_trials: int,
    seed: int,
    workers: int | None = 1,
    extra_users: int = 0,
) -> FailureCurve:
    """Run ``n_trials`` independent trials and aggregate them into a failure curve.

    Args:
        tau_max: Last deadline (TTIs) of the curve; each trial runs this long.
        seed: Root seed; trial ``i`` uses ``SeedSequence(seed, spawn_key=(i,))``.
        workers: Worker processes (``None`` uses every CPU).
        extra_users: Users added to every trial on top of the Poisson drop.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if tau_max < 1:
        raise ValueError("tau_max must be >= 1")
    workers = os.cpu_count() or 1 if workers is None else max(1, int(workers))
    n_chunks = min(n_trials, workers * 4) if workers > 1 else 1
    bounds = np.linspace(0, n_trials, n_chunks + 1).astype(int)
    jobs = [(cfg, scheme, tau_max, seed, range(lo, hi), extra_users) for lo, hi in zip(bounds[:-1], bounds[1:])]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(job) for job in jobs]

    hist = sum(p[0] for p in parts)
    n_users = sum(p[1] for p in parts)
    active = sum(p[2] for p in parts)
    success = sum(p[3] for p in parts)
    counters = sum(p[4] for p in parts)
    tau = np.arange(1, tau_max + 1)
    delivered = np.cumsum(hist)[1:]
    return FailureCurve(
        tau=tau,
        failures=n_users - delivered,
        n_users=int(n_users),
        n_trials=n_trials,
        tti_ms=cfg.tti_ms,
        attempt_active=active,
        attempt_success=success,
        counters=counters,
        completion_hist=hist,
    )


def empirical_attempt_stats(curve: FailureCurve, m: int, min_samples: int = 1) -> tuple[float, float]:
    """Measured active fraction and success frequency of attempt ``m``."""
    if m < 1:
        raise ValueError("attempt index must be >= 1")
    count = int(curve.attempt_active[m]) if m < curve.attempt_active.size else 0
    if count < min_samples or curve.n_users == 0:
        raise InsufficientSamples(m, count, min_samples)
    return count / curve.n_users, int(curve.attempt_success[m]) / count
