"""Contention-resolution policies.

``lowsense_*`` is the energy-efficient multiplicative-weight backoff: a
packet with window ``w`` accesses the channel with probability
``c ln^3(w) / w`` and, when it does, sends with probability
``1 / (c ln^3 w)``. Listening to an empty slot shrinks the window by the
factor ``1 + 1/(c ln w)`` (never below ``w_min``); a full slot grows it by
the same factor.

Binary exponential backoff and fixed-probability ALOHA are provided as
baselines. Each policy exists twice: scalar functions over one packet,
used by tests and small experiments, and a vectorised kernel used by the
engine. Both consume uniforms the same way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .channel import Action, Feedback, SlotState
from .rng import uniforms

E3 = math.exp(3.0)


class ConfigError(ValueError):
    """Invalid policy, adversary or scenario configuration."""


def min_valid_w_min(c: float) -> float:
    """Smallest ``w >= e^3`` for which ``c ln^3(w) / w <= 1``."""
    if c * 27.0 / E3 <= 1.0:
        return E3
    return brentq(lambda w: c * math.log(w) ** 3 / w - 1.0, E3, 1e15, xtol=1e-12, rtol=1e-15)


@dataclass(frozen=True)
class PolicyParams:
    c: float = 1.0
    w_min: float = 128.0
    # a listener that hears someone else's success backs off (full slot)
    success_as_full: bool = True

    def validate(self) -> "PolicyParams":
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ConfigError(f"c must be positive, got {self.c}")
        if not self.w_min >= E3:
            raise ConfigError(f"w_min must be >= e^3 ~ 20.09, got {self.w_min}")
        p = listen_probability(self.w_min, self.c)
        if p > 1.0:
            raise ConfigError(
                f"c ln^3(w_min)/w_min = {p:.6g} > 1; raise w_min to at least "
                f"{min_valid_w_min(self.c):.6g}")
        return self


def listen_probability(w, c):
    return c * np.log(w) ** 3 / w


def send_given_listen(w, c):
    return 1.0 / (c * np.log(w) ** 3)


def backoff_factor(w, c):
    return 1.0 + 1.0 / (c * np.log(w))


def backed_off(w, c):
    return w * backoff_factor(w, c)


def backed_on(w, c, w_min):
    return np.maximum(w / backoff_factor(w, c), w_min)


@dataclass(frozen=True)
class PacketState:
    id: int
    w: float
    arrival_slot: int = 0
    accesses: int = 0
    done: bool = False


def new_packet(packet_id: int, params: PolicyParams, slot: int = 0) -> PacketState:
    return PacketState(id=packet_id, w=float(params.w_min), arrival_slot=slot)


def lowsense_decide(state: PacketState, params: PolicyParams, rng) -> Action:
    """One slot's action; draws one uniform, plus a second if it listens."""
    if state.done:
        raise ValueError("packet already delivered")
    p_listen = float(listen_probability(state.w, params.c))
    if p_listen > 1.0:
        raise ConfigError(f"listen probability {p_listen} > 1 at w={state.w}")
    if rng.random() >= p_listen:
        return Action.SLEEP
    if rng.random() < float(send_given_listen(state.w, params.c)):
        return Action.SEND_AND_LISTEN
    return Action.LISTEN


def lowsense_update(state: PacketState, fb: Feedback, params: PolicyParams,
                    sent: bool = False) -> PacketState:
    """Apply the window rule after an access in which ``fb`` was observed."""
    if fb is None:
        raise ValueError("update requires feedback; sleeping packets do not update")
    state = replace(state, accesses=state.accesses + 1)
    if fb.ternary is SlotState.EMPTY:
        return replace(state, w=float(backed_on(state.w, params.c, params.w_min)))
    if fb.ternary is SlotState.SUCCESS:
        if sent:
            return replace(state, done=True)
        if not params.success_as_full:
            return state
    return replace(state, w=float(backed_off(state.w, params.c)))


def lowsense_decide_many(w: np.ndarray, c: float, u_listen: np.ndarray,
                         u_send: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``lowsense_decide`` given the two uniforms per packet."""
    lnw = np.log(w)
    listen = u_listen < c * lnw ** 3 / w
    send = listen & (u_send < 1.0 / (c * lnw ** 3))
    return listen, send


def lowsense_update_many(w: np.ndarray, state: SlotState, c: float, w_min: float,
                         success_as_full: bool = True) -> np.ndarray:
    """New windows for listeners that stay in the system."""
    if state is SlotState.EMPTY:
        return backed_on(w, c, w_min)
    if state is SlotState.SUCCESS and not success_as_full:
        return w
    return backed_off(w, c)


@dataclass(frozen=True)
class BebState:
    window: int = 1
    chosen_slot: int = 0
    offset: int = 0
    collisions: int = 0


def beb_decide(state: BebState, rng=None) -> Action:
    # oblivious: one send per window, never listens otherwise
    return Action.SEND_AND_LISTEN if state.offset == state.chosen_slot else Action.SLEEP


def beb_update(state: BebState, fb: Optional[Feedback], rng) -> BebState:
    """Advance one slot. When the window runs out the packet has failed in it."""
    offset = state.offset + 1
    if offset < state.window:
        return replace(state, offset=offset)
    window = 2 * state.window
    return BebState(window=window, chosen_slot=int(rng.random() * window), offset=0,
                    collisions=state.collisions + 1)


def aloha_decide(p: float, rng) -> Action:
    if not 0.0 < p <= 1.0:
        raise ConfigError(f"ALOHA probability must lie in (0, 1], got {p}")
    return Action.SEND_AND_LISTEN if rng.random() < p else Action.SLEEP


# --- engine kernels -------------------------------------------------------
#
# A kernel keeps its per-packet state as numpy columns inside the engine's
# population table. Counter layout per packet and slot t: draw 2t decides
# whether to act, draw 2t+1 is the conditional send coin.


class LowSenseKernel:
    name = "lowsense"
    columns = ("w",)
    has_potential = True

    def __init__(self, params: PolicyParams):
        self.params = params.validate()

    def new_columns(self, n: int, t: int, keys: np.ndarray) -> dict:
        return {"w": np.full(n, float(self.params.w_min))}

    def windows(self, cols: dict, n: int = 0) -> np.ndarray:
        return cols["w"]

    def decide(self, t: int, keys: np.ndarray, cols: dict) -> tuple[np.ndarray, np.ndarray]:
        n = keys.size
        listen = np.empty(n, dtype=np.bool_)
        send = np.empty(n, dtype=np.bool_)
        _kernels.lowsense_decide(keys, cols["w"], float(self.params.c), int(t), listen, send)
        return listen, send

    def observe(self, t: int, keys: np.ndarray, cols: dict, listeners: np.ndarray,
                state: SlotState) -> None:
        if listeners.size == 0:
            return
        w = cols["w"]
        p = self.params
        w[listeners] = lowsense_update_many(w[listeners], state, p.c, p.w_min, p.success_as_full)


class BebKernel:
    name = "beb"
    columns = ("window", "start", "chosen")
    has_potential = False

    def new_columns(self, n: int, t: int, keys: np.ndarray) -> dict:
        return {"window": np.ones(n, dtype=np.int64),
                "start": np.full(n, t, dtype=np.int64),
                "chosen": np.zeros(n, dtype=np.int64)}

    def windows(self, cols: dict, n: int = 0) -> np.ndarray:
        return cols["window"].astype(np.float64)

    def decide(self, t: int, keys: np.ndarray, cols: dict) -> tuple[np.ndarray, np.ndarray]:
        send = cols["start"] + cols["chosen"] == t
        return send, send.copy()

    def observe(self, t: int, keys: np.ndarray, cols: dict, listeners: np.ndarray,
                state: SlotState) -> None:
        # window bookkeeping happens for everybody, see advance()
        return

    def advance(self, t: int, keys: np.ndarray, cols: dict) -> None:
        ended = np.flatnonzero(cols["start"] + cols["window"] - 1 <= t)
        if ended.size == 0:
            return
        window = cols["window"][ended] * 2
        cols["window"][ended] = window
        cols["start"][ended] = t + 1
        u = uniforms(keys[ended], 2 * (t + 1))
        cols["chosen"][ended] = np.minimum((u * window).astype(np.int64), window - 1)


class AlohaKernel:
    name = "aloha"
    columns = ()
    has_potential = False

    def __init__(self, p: float):
        if not 0.0 < p <= 1.0:
            raise ConfigError(f"ALOHA probability must lie in (0, 1], got {p}")
        self.p = float(p)

    def new_columns(self, n: int, t: int, keys: np.ndarray) -> dict:
        return {}

    def windows(self, cols: dict, n: int = 0) -> np.ndarray:
        return np.full(n, 1.0 / self.p)

    def decide(self, t: int, keys: np.ndarray, cols: dict) -> tuple[np.ndarray, np.ndarray]:
        send = uniforms(keys, 2 * t) < self.p
        return send, send.copy()

    def observe(self, t, keys, cols, listeners, state) -> None:
        return
