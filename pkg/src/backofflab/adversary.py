"""Arrival processes, jammers and the adversarial-queuing budget.

Adaptive strategies see an :class:`ObservableHistory` that stops at the end
of the previous slot. Reactive jammers additionally get the ids of the
packets sending in the current slot, and nothing about who only listens.
Strategies draw randomness from their own substream, never from packets'.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .channel import SlotState
from .policy import ConfigError
from .rng import ADVERSARY, ARRIVALS, entity_keys, uniforms


@dataclass(frozen=True)
class AdversaryDecision:
    injections: int = 0
    jam: bool = False


class ObservableHistory:
    """Read-only view of a run through the end of slot ``t - 1``.

    The engine owns the underlying buffers and advances ``t``; strategies
    must not keep references to the arrays it hands out.
    """

    def __init__(self, engine_state=None):
        self._engine = engine_state
        self.t = 1

    @property
    def states(self) -> Sequence[int]:
        return self._engine.trace.state

    @property
    def injections(self) -> Sequence[int]:
        return self._engine.trace.injections

    @property
    def jams(self) -> Sequence[int]:
        return self._engine.trace.jammed

    @property
    def contentions(self) -> Sequence[float]:
        return self._engine.trace.contention

    @property
    def last_state(self) -> Optional[SlotState]:
        s = self.states
        return SlotState(s[-1]) if len(s) else None

    @property
    def last_contention(self) -> Optional[float]:
        c = self.contentions
        return c[-1] if len(c) else None

    @property
    def active_count(self) -> int:
        return self._engine.active_count

    def packet_ids(self) -> np.ndarray:
        return self._engine.ids.copy()

    def windows(self) -> np.ndarray:
        return self._engine.kernel_windows().copy()

    def last_listeners(self) -> np.ndarray:
        return self._engine.last_listener_ids.copy()


@dataclass(frozen=True)
class QueuingConstraint:
    lam: float
    S: int

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ConfigError(f"lambda must lie in (0, 1), got {self.lam}")
        if int(self.S) != self.S or self.S < 1:
            raise ConfigError(f"S must be a positive integer, got {self.S}")

    @property
    def budget(self) -> int:
        # floor of lambda*S, guarded against 0.29*100 == 28.999...
        return math.floor(self.lam * self.S + 1e-9)


# --- arrival processes ------------------------------------------------------

class BatchArrivals:
    """``n`` packets at slot 1 and nothing afterwards."""

    def __init__(self, n: int):
        if n < 1:
            raise ConfigError(f"batch size must be >= 1, got {n}")
        self.n = int(n)

    def decide(self, history: ObservableHistory) -> AdversaryDecision:
        return AdversaryDecision(self.n if history.t == 1 else 0, False)

    def exhausted(self, t: int) -> bool:
        return t >= 1


class BernoulliArrivals:
    """One packet per slot with probability ``rate`` up to ``horizon``."""

    def __init__(self, rate: float, horizon: Optional[int] = None, seed: int = 0):
        if not 0.0 <= rate <= 1.0:
            raise ConfigError(f"rate must lie in [0, 1], got {rate}")
        self.rate = float(rate)
        self.horizon = horizon
        self._key = entity_keys(seed, [0], ARRIVALS)

    def decide(self, history: ObservableHistory) -> AdversaryDecision:
        t = history.t
        if self.horizon is not None and t > self.horizon:
            return AdversaryDecision()
        hit = uniforms(self._key, t)[0] < self.rate
        return AdversaryDecision(int(hit), False)

    def exhausted(self, t: int) -> bool:
        return self.rate == 0.0 or (self.horizon is not None and t >= self.horizon)


class QueuingPattern(str, enum.Enum):
    FRONT_LOADED = "front_loaded"
    SPREAD = "spread"
    ADAPTIVE_GREEDY = "adaptive_greedy"


class QueuingArrivals:
    """Arrivals and jams respecting an adversarial-queuing budget.

    ``front_loaded`` spends each aligned block's budget one event per slot at
    the start of the block, ``spread`` spaces the events evenly. Both are
    periodic with period ``S``, so every sliding window holds exactly the
    budget. ``adaptive_greedy`` injects right after observed successes (or
    whenever the system is empty) and, if it owns a jam share, jams right
    after observed silence; a running sliding-window count keeps it legal.
    """

    def __init__(self, constraint: QueuingConstraint, pattern="front_loaded",
                 jam_share: float = 0.0, horizon: Optional[int] = None):
        self.constraint = constraint
        self.pattern = QueuingPattern(pattern)
        if not 0.0 <= jam_share <= 1.0:
            raise ConfigError(f"jam_share must lie in [0, 1], got {jam_share}")
        self.jam_share = float(jam_share)
        self.horizon = horizon
        B = constraint.budget
        self.n_jams = math.floor(self.jam_share * B + 1e-9)
        self.n_inject = B - self.n_jams
        S = constraint.S
        # periodic patterns: offset within block -> (injections, jam)
        self._table: dict[int, tuple[int, bool]] = {}
        if self.pattern is QueuingPattern.FRONT_LOADED:
            for k in range(B):
                self._table[k] = (1, False) if k < self.n_inject else (0, True)
        elif self.pattern is QueuingPattern.SPREAD:
            for k in range(B):
                is_jam = (k + 1) * self.n_jams // B > k * self.n_jams // B if B else False
                self._table[(k * S) // B] = (0, True) if is_jam else (1, False)
        self._recent: deque = deque()  # (slot, events) within the last S-1 slots
        self._recent_total = 0
        self._recent_jams = 0

    def _window_load(self, t: int) -> int:
        S = self.constraint.S
        while self._recent and self._recent[0][0] <= t - S:
            _, n, j = self._recent.popleft()
            self._recent_total -= n
            self._recent_jams -= j
        return self._recent_total

    def decide(self, history: ObservableHistory) -> AdversaryDecision:
        t = history.t
        if self.horizon is not None and t > self.horizon:
            return AdversaryDecision()
        if self.pattern is not QueuingPattern.ADAPTIVE_GREEDY:
            inj, jam = self._table.get((t - 1) % self.constraint.S, (0, False))
            return AdversaryDecision(inj, jam)
        allowed = self.constraint.budget - self._window_load(t)
        inj = 0
        jam = False
        last = history.last_state
        if allowed > 0 and (last is SlotState.SUCCESS or history.active_count == 0):
            inj = min(allowed, self.n_inject)
            allowed -= inj
        if (allowed > 0 and self._recent_jams < self.n_jams and last is SlotState.EMPTY
                and history.active_count > 0):
            jam = True
        return AdversaryDecision(inj, jam)

    def commit(self, t: int, decision: AdversaryDecision) -> None:
        if self.pattern is QueuingPattern.ADAPTIVE_GREEDY and (decision.injections or decision.jam):
            self._window_load(t)
            self._recent.append((t, decision.injections + int(decision.jam), int(decision.jam)))
            self._recent_total += decision.injections + int(decision.jam)
            self._recent_jams += int(decision.jam)

    def exhausted(self, t: int) -> bool:
        return self.horizon is not None and t >= self.horizon


# --- jammers ----------------------------------------------------------------

class NeverJam:
    def decide(self, history: ObservableHistory) -> bool:
        return False


class FirstSlotsJam:
    def __init__(self, j: int):
        self.j = int(j)

    def decide(self, history: ObservableHistory) -> bool:
        return history.t <= self.j


class RandomJam:
    def __init__(self, p: float, seed: int = 0):
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"jam probability must lie in [0, 1], got {p}")
        self.p = float(p)
        self._key = entity_keys(seed, [1], ADVERSARY)

    def decide(self, history: ObservableHistory) -> bool:
        return bool(uniforms(self._key, history.t)[0] < self.p)


class ContentionTriggeredJam:
    """Jam whenever the previous slot's contention was below ``threshold``
    while packets were present; stresses the window-shrinking phase."""

    def __init__(self, threshold: float, budget: Optional[int] = None):
        self.threshold = float(threshold)
        self.budget = budget
        self._used = 0

    def decide(self, history: ObservableHistory) -> bool:
        if self.budget is not None and self._used >= self.budget:
            return False
        c = history.last_contention
        return not (c is None or history.active_count == 0 or c >= self.threshold)

    def commit(self, jam: bool) -> None:
        self._used += bool(jam)


class NoReactiveJam:
    def decide(self, history: ObservableHistory, send_ids) -> bool:
        return False

    def commit(self, jam: bool) -> None:
        pass


class TargetPacketJam:
    """Jam every slot in which packet ``target`` sends, ``budget`` times."""

    def __init__(self, target: int, budget: int):
        self.target = int(target)
        self.budget = int(budget)
        self.used = 0

    def decide(self, history: ObservableHistory, send_ids) -> bool:
        return self.used < self.budget and self.target in send_ids

    def commit(self, jam: bool) -> None:
        self.used += bool(jam)


class AnySendJam:
    def __init__(self, budget: int):
        self.budget = int(budget)
        self.used = 0

    def decide(self, history: ObservableHistory, send_ids) -> bool:
        return self.used < self.budget and len(send_ids) > 0

    def commit(self, jam: bool) -> None:
        self.used += bool(jam)


def jam_adaptive(strategy, history: ObservableHistory) -> bool:
    return bool(strategy.decide(history))


def jam_reactive(strategy, history: ObservableHistory, send_ids) -> bool:
    return bool(strategy.decide(history, send_ids))


def arrivals_batch(n: int) -> BatchArrivals:
    return BatchArrivals(n)


def arrivals_bernoulli(rate: float, horizon: Optional[int] = None, seed: int = 0) -> BernoulliArrivals:
    return BernoulliArrivals(rate, horizon, seed)


def arrivals_queuing_burst(constraint: QueuingConstraint, pattern="front_loaded",
                           jam_share: float = 0.0, horizon: Optional[int] = None) -> QueuingArrivals:
    return QueuingArrivals(constraint, pattern, jam_share, horizon)


# --- schedule validation ----------------------------------------------------

@dataclass(frozen=True)
class ScheduleReport:
    ok: bool
    budget: int
    max_load: int
    violation: Optional[tuple[int, int]] = None  # first violating window, 1-based inclusive

    def __bool__(self) -> bool:
        return self.ok


def validate_schedule(trace, constraint: QueuingConstraint) -> ScheduleReport:
    """Check every window of ``S`` consecutive slots (stride 1).

    ``trace`` is anything with ``injections`` and ``jammed`` per-slot
    sequences, or an ``(injections, jammed)`` pair. A trace shorter than
    ``S`` is checked as a single window.
    """
    if isinstance(trace, tuple):
        inj, jam = trace
    else:
        inj, jam = trace.injections, trace.jammed
    inj = np.asarray(inj, dtype=np.int64)
    jam = np.asarray(jam, dtype=np.int64)
    if inj.ndim != 1 or inj.shape != jam.shape:
        raise ValueError("malformed trace: injections and jams must be equal-length 1-d sequences")
    if np.any(inj < 0) or np.any((jam != 0) & (jam != 1)):
        raise ValueError("malformed trace: negative injections or non-boolean jam flags")
    B = constraint.budget
    if inj.size == 0:
        return ScheduleReport(True, B, 0)
    events = inj + jam
    S = int(constraint.S)
    if inj.size <= S:
        load = np.array([events.sum()])
    else:
        csum = np.concatenate(([0], np.cumsum(events)))
        load = csum[S:] - csum[:-S]
    bad = np.flatnonzero(load > B)
    if bad.size:
        start = int(bad[0]) + 1
        return ScheduleReport(False, B, int(load.max()), (start, start + S - 1))
    return ScheduleReport(True, B, int(load.max()))
