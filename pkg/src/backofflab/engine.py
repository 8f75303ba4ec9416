"""The slot loop.

Per slot ``t`` the engine

1. asks the adaptive adversary for injections and a jam flag, with a
   history that ends at slot ``t - 1``, and logs the decision;
2. injects the new packets at ``w_min`` (they act in slot ``t``);
3. draws every packet's action from its own counter-based stream;
4. lets a reactive jammer look at the set of senders;
5. resolves the slot, removing a successful sender at once;
6. hands feedback to the remaining channel users and updates windows;
7. updates counters, the interval ledger and the trace.
"""
from __future__ import annotations

import enum
import math
from array import array
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from . import adversary as adv
from .channel import SlotState, state_from_counts
from ._kernels import window_stats
from .metrics import (EMPTY_SNAPSHOT, ContentionClass, IntervalLedger, PotentialParams,
                      PotentialSnapshot, classify_contention)
from .policy import AlohaKernel, BebKernel, ConfigError, LowSenseKernel, PolicyParams
from .rng import PACKET, entity_keys

DEFAULT_HORIZON = 10_000_000


class TraceLevel(str, enum.Enum):
    SUMMARY = "summary"
    CHECKPOINTS = "checkpoints"
    FULL = "full"


@dataclass(frozen=True)
class AdversarySpec:
    """Declarative adversary: arrival process plus adaptive and reactive jammers.

    Each part is a mapping with a ``kind`` key and that kind's parameters.
    """
    arrivals: dict = field(default_factory=lambda: {"kind": "batch", "n": 1})
    adaptive_jam: dict = field(default_factory=lambda: {"kind": "never"})
    reactive_jam: dict = field(default_factory=lambda: {"kind": "none"})
    seed_offset: int = 0

    def build(self, master_seed: int, horizon: Optional[int]):
        seed = (int(master_seed) + int(self.seed_offset)) & ((1 << 64) - 1)
        a = dict(self.arrivals)
        kind = a.pop("kind")
        if kind == "batch":
            arrivals = adv.BatchArrivals(a["n"])
        elif kind == "bernoulli":
            arrivals = adv.BernoulliArrivals(a["rate"], a.get("horizon", horizon), seed)
        elif kind == "queuing":
            qc = adv.QueuingConstraint(a["lam"], a["S"])
            arrivals = adv.QueuingArrivals(qc, a.get("pattern", "front_loaded"),
                                           a.get("jam_share", 0.0), a.get("horizon", horizon))
        else:
            raise ConfigError(f"unknown arrivals kind {kind!r}")

        j = dict(self.adaptive_jam)
        kind = j.pop("kind")
        if kind == "never":
            jammer = adv.NeverJam()
        elif kind == "first":
            jammer = adv.FirstSlotsJam(j["j"])
        elif kind == "random":
            jammer = adv.RandomJam(j["p"], seed)
        elif kind == "contention":
            jammer = adv.ContentionTriggeredJam(j["threshold"], j.get("budget"))
        else:
            raise ConfigError(f"unknown adaptive jammer kind {kind!r}")

        r = dict(self.reactive_jam)
        kind = r.pop("kind")
        if kind == "none":
            reactive = None
        elif kind == "target":
            reactive = adv.TargetPacketJam(r["target"], r["budget"])
        elif kind == "any_send":
            reactive = adv.AnySendJam(r["budget"])
        else:
            raise ConfigError(f"unknown reactive jammer kind {kind!r}")
        return arrivals, jammer, reactive


@dataclass(frozen=True)
class EngineConfig:
    policy: str = "lowsense"
    params: PolicyParams = PolicyParams()
    aloha_p: float = 0.1
    adversary: AdversarySpec = AdversarySpec()
    potential: PotentialParams = PotentialParams()
    horizon: int = DEFAULT_HORIZON
    master_seed: int = 0
    trace_level: TraceLevel = TraceLevel.SUMMARY
    checkpoint_stride: int = 100

    def make_kernel(self):
        if self.policy == "lowsense":
            return LowSenseKernel(self.params)
        if self.policy == "beb":
            return BebKernel()
        if self.policy == "aloha":
            return AlohaKernel(self.aloha_p)
        raise ConfigError(f"unknown policy {self.policy!r}")

    def validate(self) -> "EngineConfig":
        self.make_kernel()
        self.potential.resolved(self.params.w_min)
        if int(self.horizon) < 1:
            raise ConfigError("horizon must be >= 1")
        if int(self.checkpoint_stride) < 1:
            raise ConfigError("checkpoint_stride must be >= 1")
        if not 0 <= int(self.master_seed) < 1 << 64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        TraceLevel(self.trace_level)
        self.adversary.build(self.master_seed, self.horizon)
        return self


@dataclass(frozen=True)
class TraceEvent:
    t: int
    injections: int
    adaptive_jam: bool
    reactive_jam: bool
    senders: int
    listeners: int
    state: SlotState
    departed: Optional[int]
    contention: float
    contention_class: Optional[ContentionClass]
    active: int
    T: int
    S: int
    N: int
    J: int
    phi: Optional[float]


@dataclass
class PacketRecord:
    id: int
    arrival: int
    departure: Optional[int]
    accesses: int
    peak_window: float


@dataclass
class Trace:
    """Column store of one run: one entry per slot plus per-packet records."""
    injections: array = field(default_factory=lambda: array("q"))
    adaptive_jam: array = field(default_factory=lambda: array("b"))
    reactive_jam: array = field(default_factory=lambda: array("b"))
    jammed: array = field(default_factory=lambda: array("b"))
    senders: array = field(default_factory=lambda: array("q"))
    listeners: array = field(default_factory=lambda: array("q"))
    state: array = field(default_factory=lambda: array("b"))
    departed: array = field(default_factory=lambda: array("q"))
    contention: array = field(default_factory=lambda: array("d"))
    contention_class: array = field(default_factory=lambda: array("b"))
    active: array = field(default_factory=lambda: array("q"))
    phi: array = field(default_factory=lambda: array("d"))
    packets: list = field(default_factory=list)
    intervals: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.state)

    def cumulative(self) -> dict:
        """Running T, S, N, J after every slot."""
        state = np.frombuffer(self.state, dtype=np.int8) if len(self) else np.zeros(0, np.int8)
        return {
            "T": np.cumsum(state == SlotState.SUCCESS),
            "S": np.cumsum(np.asarray(self.active) > 0),
            "N": np.cumsum(np.asarray(self.injections)),
            "J": np.cumsum(np.asarray(self.jammed)),
        }

    def events(self) -> Iterator[TraceEvent]:
        cum = self.cumulative()
        for i in range(len(self)):
            cls = self.contention_class[i]
            phi = self.phi[i]
            dep = self.departed[i]
            yield TraceEvent(
                t=i + 1, injections=self.injections[i], adaptive_jam=bool(self.adaptive_jam[i]),
                reactive_jam=bool(self.reactive_jam[i]), senders=self.senders[i],
                listeners=self.listeners[i], state=SlotState(self.state[i]),
                departed=None if dep < 0 else dep, contention=self.contention[i],
                contention_class=None if cls < 0 else ContentionClass(cls), active=self.active[i],
                T=int(cum["T"][i]), S=int(cum["S"][i]), N=int(cum["N"][i]), J=int(cum["J"][i]),
                phi=None if math.isnan(phi) else phi)


@dataclass
class SummaryStats:
    status: str              # "drained" or "horizon"
    truncated: bool
    slots: int
    makespan: int            # last active slot, 0 if none
    T: int
    S: int
    N: int
    J: int
    throughput: Optional[float]
    implicit_throughput: Optional[float]
    min_implicit_throughput: Optional[float]
    packets: int
    completed: int
    max_accesses: int
    median_accesses: float
    mean_accesses: float
    max_window: float
    max_backlog: int
    max_phi: Optional[float]

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(trace: Trace, checkpoint_stride: int, horizon_hit: bool) -> SummaryStats:
    """Summary derived from the trace alone, so a reloaded trace reproduces it."""
    n = len(trace)
    cum = trace.cumulative()
    active = np.asarray(trace.active, dtype=np.int64)
    if n:
        T, S, N, J = (int(cum[k][-1]) for k in "TSNJ")
    else:
        T = S = N = J = 0
    thr = (T + J) / S if S else None
    ithr = (N + J) / S if S else None
    checkpoints = np.arange(checkpoint_stride, n + 1, checkpoint_stride) - 1
    if n and (n - 1) not in set(checkpoints.tolist()):
        checkpoints = np.append(checkpoints, n - 1)
    min_ithr = None
    if n:
        s = cum["S"][checkpoints]
        ok = s > 0
        if ok.any():
            vals = (cum["N"][checkpoints][ok] + cum["J"][checkpoints][ok]) / s[ok]
            min_ithr = float(vals.min())
    acc = np.array([p.accesses for p in trace.packets], dtype=np.int64)
    peak = [p.peak_window for p in trace.packets]
    phi = np.asarray(trace.phi, dtype=np.float64)
    phi = phi[~np.isnan(phi)] if phi.size else phi
    active_slots = np.flatnonzero(active > 0)
    still_active = int(active[-1]) if n else 0
    departed_last = n and trace.departed[-1] >= 0
    return SummaryStats(
        status="horizon" if horizon_hit else "drained",
        truncated=bool(horizon_hit and (still_active - int(bool(departed_last))) > 0),
        slots=n,
        makespan=int(active_slots[-1]) + 1 if active_slots.size else 0,
        T=T, S=S, N=N, J=J,
        throughput=thr, implicit_throughput=ithr, min_implicit_throughput=min_ithr,
        packets=len(trace.packets),
        completed=sum(p.departure is not None for p in trace.packets),
        max_accesses=int(acc.max()) if acc.size else 0,
        median_accesses=float(np.median(acc)) if acc.size else 0.0,
        mean_accesses=float(acc.mean()) if acc.size else 0.0,
        max_window=float(max(peak)) if peak else 0.0,
        max_backlog=int(active.max()) if n else 0,
        max_phi=float(phi.max()) if phi.size else None,
    )


@dataclass
class RunResult:
    config: EngineConfig
    summary: SummaryStats
    trace: Trace


class _Population:
    """Active packets as parallel numpy columns."""

    def __init__(self, kernel, master_seed: int):
        self.kernel = kernel
        self.master_seed = master_seed
        self.ids = np.zeros(0, dtype=np.int64)
        self.keys = np.zeros(0, dtype=np.uint64)
        self.arrival = np.zeros(0, dtype=np.int64)
        self.accesses = np.zeros(0, dtype=np.int64)
        self.peak = np.zeros(0, dtype=np.float64)
        self.cols = {name: np.zeros(0) for name in kernel.columns}
        self.next_id = 0

    def __len__(self) -> int:
        return self.ids.size

    def add(self, n: int, t: int) -> None:
        ids = np.arange(self.next_id, self.next_id + n, dtype=np.int64)
        self.next_id += n
        keys = entity_keys(self.master_seed, ids, PACKET)
        new = self.kernel.new_columns(n, t, keys)
        self.ids = np.concatenate((self.ids, ids))
        self.keys = np.concatenate((self.keys, keys))
        self.arrival = np.concatenate((self.arrival, np.full(n, t, dtype=np.int64)))
        self.accesses = np.concatenate((self.accesses, np.zeros(n, dtype=np.int64)))
        for name in self.kernel.columns:
            self.cols[name] = np.concatenate((self.cols[name].astype(new[name].dtype), new[name]))
        self.peak = np.concatenate((self.peak, self.windows()[-n:]))

    def remove(self, i: int) -> None:
        self.ids = np.delete(self.ids, i)
        self.keys = np.delete(self.keys, i)
        self.arrival = np.delete(self.arrival, i)
        self.accesses = np.delete(self.accesses, i)
        self.peak = np.delete(self.peak, i)
        for name in self.kernel.columns:
            self.cols[name] = np.delete(self.cols[name], i)

    def windows(self) -> np.ndarray:
        return self.kernel.windows(self.cols, self.ids.size)


class _EngineView:
    """What the adversary's history view reads from."""

    def __init__(self, pop: _Population, trace: Trace):
        self.pop = pop
        self.trace = trace
        self.last_listener_ids = np.zeros(0, dtype=np.int64)

    @property
    def active_count(self) -> int:
        return len(self.pop)

    @property
    def ids(self) -> np.ndarray:
        return self.pop.ids

    def kernel_windows(self) -> np.ndarray:
        return self.pop.windows()


CoinHook = Callable[[int, np.ndarray, np.ndarray, np.ndarray], tuple]


def _snapshot(w: np.ndarray, pot: PotentialParams) -> tuple[float, PotentialSnapshot]:
    if w.size == 0:
        return 0.0, EMPTY_SNAPSHOT
    C, H, w_max = window_stats(w)
    L = w_max / math.log(w_max) ** 2
    phi = pot.alpha1 * w.size + pot.alpha2 * H + pot.alpha3 * L
    return C, PotentialSnapshot(int(w.size), H, L, phi, w_max)


def run(config: EngineConfig, coin_hook: Optional[CoinHook] = None,
        decision_log: Optional[list] = None) -> RunResult:
    """Simulate one scenario until the system drains or the horizon is hit.

    ``coin_hook(t, ids, listen, send)`` may replace the packets' drawn actions
    for a slot; ``decision_log`` collects ``[t, injections, adaptive_jam,
    reactive_jam]``. Both exist for counterfactual testing.
    """
    config.validate()
    kernel = config.make_kernel()
    arrivals, jammer, reactive = config.adversary.build(config.master_seed, config.horizon)
    pot = config.potential.resolved(config.params.w_min)
    track_phi = kernel.has_potential

    pop = _Population(kernel, config.master_seed)
    trace = Trace()
    view = _EngineView(pop, trace)
    history = adv.ObservableHistory(view)
    ledger = IntervalLedger(pot, config.params.w_min) if track_phi else None
    advance = getattr(kernel, "advance", None)
    arrivals_commit = getattr(arrivals, "commit", None)
    jammer_commit = getattr(jammer, "commit", None)
    no_listeners = np.zeros(0, dtype=np.int64)
    nan = float("nan")
    horizon_hit = True
    # C and the snapshot describe the current windows; refreshed only on change
    C_cur, snap_cur = 0.0, EMPTY_SNAPSHOT

    tr = trace
    for t in range(1, int(config.horizon) + 1):
        history.t = t
        decision = arrivals.decide(history)
        if arrivals_commit is not None:
            arrivals_commit(t, decision)
        ajam = bool(jammer.decide(history))
        if jammer_commit is not None:
            jammer_commit(ajam)
        adaptive_jam = bool(decision.jam) or ajam
        inj = int(decision.injections)
        if decision_log is not None:
            decision_log.append([t, inj, adaptive_jam, False])

        if inj:
            pop.add(inj, t)
        n = len(pop)
        if n == 0:
            # idle slot: nobody acts, only the adversary matters
            rjam = False
            if reactive is not None:
                rjam = bool(reactive.decide(history, frozenset()))
                reactive.commit(rjam)
                if decision_log is not None:
                    decision_log[-1][3] = rjam
            jammed = adaptive_jam or rjam
            view.last_listener_ids = no_listeners
            tr.injections.append(0)
            tr.adaptive_jam.append(adaptive_jam)
            tr.reactive_jam.append(rjam)
            tr.jammed.append(jammed)
            tr.senders.append(0)
            tr.listeners.append(0)
            tr.state.append(2 if jammed else 0)
            tr.departed.append(-1)
            tr.contention.append(0.0)
            tr.contention_class.append(-1)
            tr.active.append(0)
            tr.phi.append(0.0 if track_phi else nan)
            if arrivals.exhausted(t):
                horizon_hit = False
                break
            continue

        if inj:
            if track_phi:
                C_cur, snap_cur = _snapshot(pop.cols["w"], pot)
            else:
                C_cur = float(np.sum(1.0 / pop.windows()))
        elif not track_phi:
            C_cur = float(np.sum(1.0 / pop.windows()))
        C, snap = C_cur, snap_cur
        cls = classify_contention(C, pot)
        if track_phi:
            ledger.begin_slot(t, snap, inj)

        listen, send = kernel.decide(t, pop.keys, pop.cols)
        if coin_hook is not None:
            listen, send = coin_hook(t, pop.ids, listen, send)
            listen = listen | send
        send_idx = np.flatnonzero(send)

        rjam = False
        if reactive is not None:
            rjam = bool(reactive.decide(history, frozenset(pop.ids[send_idx].tolist())))
            reactive.commit(rjam)
            if decision_log is not None:
                decision_log[-1][3] = rjam
        jammed = adaptive_jam or rjam
        state = state_from_counts(send_idx.size, jammed)

        listen_idx = np.flatnonzero(listen)
        n_listen = listen_idx.size
        departed = -1
        if n_listen:
            pop.accesses[listen_idx] += 1
            winner = int(send_idx[0]) if state is SlotState.SUCCESS else -1
            observers = listen_idx[listen_idx != winner] if winner >= 0 else listen_idx
            if observers.size:
                kernel.observe(t, pop.keys, pop.cols, observers, state)
                w_now = pop.windows()
                pop.peak[observers] = np.maximum(pop.peak[observers], w_now[observers])
            view.last_listener_ids = pop.ids[listen_idx]
            if winner >= 0:
                departed = int(pop.ids[winner])
                trace.packets.append(PacketRecord(departed, int(pop.arrival[winner]), t,
                                                  int(pop.accesses[winner]), float(pop.peak[winner])))
                pop.remove(winner)
            if track_phi and (observers.size or winner >= 0):
                C_cur, snap_cur = _snapshot(pop.cols["w"], pot)
        else:
            view.last_listener_ids = no_listeners
        if advance is not None:
            advance(t, pop.keys, pop.cols)

        if track_phi:
            ledger.end_slot(jammed, cls, snap_cur)

        tr.injections.append(inj)
        tr.adaptive_jam.append(adaptive_jam)
        tr.reactive_jam.append(rjam)
        tr.jammed.append(jammed)
        tr.senders.append(int(send_idx.size))
        tr.listeners.append(n_listen)
        tr.state.append(int(state))
        tr.departed.append(departed)
        tr.contention.append(C)
        tr.contention_class.append(int(cls))
        tr.active.append(n)
        tr.phi.append(snap.phi if track_phi else nan)

        if len(pop) == 0 and arrivals.exhausted(t):
            horizon_hit = False
            break

    for i in range(len(pop)):
        trace.packets.append(PacketRecord(int(pop.ids[i]), int(pop.arrival[i]), None,
                                          int(pop.accesses[i]), float(pop.peak[i])))
    trace.packets.sort(key=lambda p: p.id)
    if ledger is not None:
        ledger.close(snap_cur)
        trace.intervals = ledger.intervals
    summary = summarize(trace, int(config.checkpoint_stride), horizon_hit)
    return RunResult(config, summary, trace)
