"""HARQ timing and the per-UE protocol state machine.

TTIs are numbered from 1; a packet arrives at t = 0, so TTI 1 is spent on
arrival processing and the first transmission happens in TTI 1 + T_A.
A latency of T TTIs means the ACK has been processed by the end of TTI T.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

from .config import HarqScheme, SystemConfig

_UNIT = SystemConfig()


class Feedback(enum.Enum):
    ACK = "ack"
    NACK = "nack"


class Phase(enum.Enum):
    IDLE = "idle"
    ARRIVAL_PROCESSING = "arrival_processing"
    TRANSMITTING = "transmitting"
    AWAITING_FEEDBACK = "awaiting_feedback"
    DONE = "done"
    FAILED = "failed"


class ProtocolError(RuntimeError):
    """An illegal HARQ transition was requested."""


def rtt(scheme: HarqScheme, cfg: SystemConfig = _UNIT) -> int:
    """Round-trip time in TTIs: transmissions plus BS processing, feedback and UE processing."""
    return scheme.repetitions * cfg.t_tx + cfg.t_dp + cfg.t_f + cfg.t_up


def latency_after(scheme: HarqScheme, m: int, cfg: SystemConfig = _UNIT) -> int:
    """User-plane latency in TTIs when the packet is acknowledged on attempt ``m``."""
    if m < 1:
        raise ValueError(f"attempt index must be >= 1, got {m}")
    return cfg.t_a + m * rtt(scheme, cfg)


def max_attempts(scheme: HarqScheme, tau: float, cfg: SystemConfig = _UNIT, *, partial: bool = False) -> int:
    """Number of HARQ attempts whose ACK can be processed within ``tau`` TTIs.

    With ``partial=True`` an attempt counts as soon as it has started before
    the deadline, i.e. ceil((tau - T_A) / RTT) instead of the floor.
    """
    budget = tau - cfg.t_a
    if budget <= 0:
        return 0
    r = rtt(scheme, cfg)
    if partial:
        return math.ceil(budget / r)
    return math.floor(budget / r)


@dataclass(frozen=True)
class UeHarqState:
    """Protocol state of one UE at the start of TTI ``next_event_tti``.

    ``next_event_tti`` is the TTI in which the current phase next does
    something (finishes arrival processing, transmits, or receives feedback).
    ``feedback_tti`` is the TTI at which the current attempt's ACK/NACK is
    processed. ``success_tti`` is set once the UE reaches ``DONE``.
    """

    phase: Phase = Phase.IDLE
    attempt: int = 0
    repetition: int = 0
    next_event_tti: int = 0
    feedback_tti: int = 0
    success_tti: int | None = None
    deadline_tti: int | None = None

    @classmethod
    def new_packet(cls, cfg: SystemConfig = _UNIT, deadline_tti: int | None = None) -> UeHarqState:
        return cls(Phase.ARRIVAL_PROCESSING, next_event_tti=cfg.t_a, deadline_tti=deadline_tti)


def _start_attempt(state: UeHarqState, scheme: HarqScheme, first_tti: int, cfg: SystemConfig) -> UeHarqState:
    return dataclasses.replace(
        state,
        phase=Phase.TRANSMITTING,
        attempt=state.attempt + 1,
        repetition=0,
        next_event_tti=first_tti,
        feedback_tti=first_tti - 1 + rtt(scheme, cfg),
    )


def step_ue(
    state: UeHarqState,
    scheme: HarqScheme,
    feedback: Feedback | None,
    current_tti: int,
    cfg: SystemConfig = _UNIT,
) -> UeHarqState:
    """Advance ``state`` over the end of TTI ``current_tti``.

    ``feedback`` must be ``None`` except in the TTI where the UE finishes
    processing the BS feedback, where it must be ACK or NACK.
    """
    phase = state.phase
    if phase in (Phase.IDLE, Phase.DONE, Phase.FAILED):
        if feedback is not None:
            raise ProtocolError(f"feedback {feedback} delivered to a UE in phase {phase.value}")
        return state
    if current_tti < state.next_event_tti:
        if feedback is not None:
            raise ProtocolError(f"feedback at TTI {current_tti} before it is due at {state.feedback_tti}")
        return state
    if current_tti > state.next_event_tti:
        raise ProtocolError(f"TTI {state.next_event_tti} was skipped (now at {current_tti})")

    if phase is Phase.ARRIVAL_PROCESSING:
        if feedback is not None:
            raise ProtocolError("feedback delivered during arrival processing")
        return _start_attempt(state, scheme, current_tti + 1, cfg)

    if phase is Phase.TRANSMITTING:
        if feedback is not None:
            raise ProtocolError("feedback delivered while transmitting")
        # each repetition occupies T_TX TTIs
        if (current_tti - (state.feedback_tti - rtt(scheme, cfg))) % cfg.t_tx != 0:
            return dataclasses.replace(state, next_event_tti=current_tti + 1)
        if state.repetition + 1 < scheme.repetitions:
            return dataclasses.replace(state, repetition=state.repetition + 1, next_event_tti=current_tti + 1)
        return dataclasses.replace(state, phase=Phase.AWAITING_FEEDBACK, next_event_tti=state.feedback_tti)

    # AWAITING_FEEDBACK, at the feedback TTI
    if feedback is None:
        raise ProtocolError(f"ACK/NACK required at TTI {current_tti}")
    if feedback is Feedback.ACK:
        return dataclasses.replace(state, phase=Phase.DONE, success_tti=current_tti, next_event_tti=current_tti)
    nxt = _start_attempt(state, scheme, current_tti + 1, cfg)
    if state.deadline_tti is not None and nxt.feedback_tti > state.deadline_tti:
        return dataclasses.replace(state, phase=Phase.FAILED, next_event_tti=current_tti)
    return nxt

