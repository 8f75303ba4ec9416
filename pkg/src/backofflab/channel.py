"""Slot resolution on a multiple-access channel with jamming.

A slot is empty, successful (exactly one sender) or noisy (two or more
senders, or jammed). Listeners receive the slot state and nothing else.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional


class SlotState(enum.IntEnum):
    EMPTY = 0
    SUCCESS = 1
    NOISY = 2


class Action(enum.IntEnum):
    SLEEP = 0
    LISTEN = 1
    SEND_AND_LISTEN = 2

    @property
    def accesses_channel(self) -> bool:
        return self is not Action.SLEEP

    @property
    def sends(self) -> bool:
        return self is Action.SEND_AND_LISTEN


@dataclass(frozen=True)
class SlotOutcome:
    state: SlotState
    jammed: bool = False
    successful_sender: Optional[int] = None
    sender_count: int = 0


@dataclass(frozen=True)
class Feedback:
    ternary: SlotState


def state_from_counts(sender_count: int, jammed: bool) -> SlotState:
    if jammed or sender_count >= 2:
        return SlotState.NOISY
    if sender_count == 1:
        return SlotState.SUCCESS
    return SlotState.EMPTY


def resolve_slot(send_set: Iterable[int], jammed: bool = False) -> SlotOutcome:
    """Resolve one slot from the ids of the packets that sent in it."""
    senders = list(send_set)
    if len(set(senders)) != len(senders):
        raise ValueError("duplicate packet id in send set")
    state = state_from_counts(len(senders), jammed)
    winner = senders[0] if state is SlotState.SUCCESS else None
    return SlotOutcome(state=state, jammed=bool(jammed),
                       successful_sender=winner, sender_count=len(senders))


def feedback_for(outcome: SlotOutcome, action: Action) -> Optional[Feedback]:
    # only the state leaks; jam provenance and sender identity stay hidden
    if action is Action.SLEEP:
        return None
    return Feedback(outcome.state)
