"""Contention, throughput, the three-term potential and the exact slot oracles."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .policy import ConfigError, backed_off, backed_on, listen_probability

MAX_EXACT_PACKETS = 25


class ContentionClass(enum.IntEnum):
    LOW = 0
    GOOD = 1
    HIGH = 2


@dataclass(frozen=True)
class PotentialParams:
    alpha1: float = 4.0
    alpha2: float = 2.0
    alpha3: float = 1.0
    c_tau: float = 4.0
    c_low: Optional[float] = None  # None -> 1/(2 w_min)
    c_high: float = 2.0

    def resolved(self, w_min: float) -> "PotentialParams":
        p = self if self.c_low is not None else replace(self, c_low=1.0 / (2.0 * w_min))
        if not p.alpha1 > p.alpha2 > p.alpha3 > 0:
            raise ConfigError("need alpha1 > alpha2 > alpha3 > 0")
        if not p.c_tau > 0:
            raise ConfigError("c_tau must be positive")
        if not (0 < p.c_low <= 1.0 / w_min < 1.0 < p.c_high):
            raise ConfigError("need 0 < C_low <= 1/w_min < 1 < C_high")
        return p


@dataclass(frozen=True)
class PotentialSnapshot:
    N: int
    H: float
    L: float
    phi: float
    w_max: float


EMPTY_SNAPSHOT = PotentialSnapshot(0, 0.0, 0.0, 0.0, 0.0)


def contention(windows) -> float:
    w = np.asarray(windows, dtype=np.float64)
    return float(np.sum(1.0 / w)) if w.size else 0.0


def classify_contention(C: float, params: PotentialParams) -> ContentionClass:
    if C < params.c_low:
        return ContentionClass.LOW
    if C > params.c_high:
        return ContentionClass.HIGH
    return ContentionClass.GOOD


def potential(windows, params: PotentialParams) -> PotentialSnapshot:
    w = np.asarray(windows, dtype=np.float64)
    if w.size == 0:
        return PotentialSnapshot(0, 0.0, 0.0, 0.0, 0.0)
    H = float(np.sum(1.0 / np.log(w)))
    w_max = float(w.max())
    L = w_max / math.log(w_max) ** 2
    phi = params.alpha1 * w.size + params.alpha2 * H + params.alpha3 * L
    return PotentialSnapshot(int(w.size), H, L, phi, w_max)


def min_interval_length(w_min: float) -> int:
    return math.ceil(w_min / math.log(w_min) ** 2)


def interval_length(w_max: float, N: int, params: PotentialParams, w_min: float) -> int:
    """Length of an analysis interval opened with ``N`` packets and largest window ``w_max``."""
    if N < 1:
        raise ValueError("an interval needs at least one active packet")
    L = w_max / math.log(w_max) ** 2
    tau = math.ceil(max(L, math.sqrt(N)) / params.c_tau)
    return max(tau, min_interval_length(w_min))


@dataclass
class MetricsAccumulator:
    T: int = 0   # successes
    S: int = 0   # active slots
    N: int = 0   # arrivals
    J: int = 0   # jammed slots
    t: int = 0   # last slot processed

    def record(self, arrivals: int, active: bool, success: bool, jammed: bool) -> None:
        self.t += 1
        self.N += arrivals
        self.S += bool(active)
        self.T += bool(success)
        self.J += bool(jammed)


def throughput(acc) -> Optional[float]:
    if acc.S < 1:
        return None
    return (acc.T + acc.J) / acc.S


def implicit_throughput(acc) -> Optional[float]:
    if acc.S < 1:
        return None
    return (acc.N + acc.J) / acc.S


# --- intervals --------------------------------------------------------------

@dataclass
class Interval:
    index: int
    start: int
    tau: int
    length: int = 0
    arrivals: int = 0
    jams: int = 0
    phi_start: float = 0.0
    phi_end: float = 0.0
    low: int = 0
    good: int = 0
    high: int = 0

    @property
    def delta_phi(self) -> float:
        return self.phi_end - self.phi_start


@dataclass
class IntervalLedger:
    """Splits the active slots of a run into consecutive analysis intervals.

    An interval opens at an active slot with length ``tau`` computed from the
    state after that slot's injections. It closes after ``tau`` slots or at
    the end of the slot in which the system drains, whichever comes first.
    """
    params: PotentialParams
    w_min: float
    intervals: list = field(default_factory=list)
    current: Optional[Interval] = None

    def begin_slot(self, t: int, snap: PotentialSnapshot, injections: int) -> None:
        if self.current is None:
            if snap.N == 0:
                return
            tau = interval_length(snap.w_max, snap.N, self.params, self.w_min)
            self.current = Interval(len(self.intervals), t, tau, phi_start=snap.phi)
        else:
            self.current.arrivals += injections

    def end_slot(self, jammed: bool, cls: Optional[ContentionClass],
                 snap_after: Optional[PotentialSnapshot]) -> None:
        iv = self.current
        if iv is None:
            return
        iv.length += 1
        iv.jams += bool(jammed)
        if cls is ContentionClass.LOW:
            iv.low += 1
        elif cls is ContentionClass.HIGH:
            iv.high += 1
        elif cls is ContentionClass.GOOD:
            iv.good += 1
        if iv.length >= iv.tau or snap_after.N == 0:
            iv.phi_end = snap_after.phi
            self.intervals.append(iv)
            self.current = None

    def close(self, snap: PotentialSnapshot) -> None:
        """Flush a partial interval at the end of a truncated run."""
        if self.current is not None:
            self.current.phi_end = snap.phi
            self.intervals.append(self.current)
            self.current = None


# --- exact oracles ----------------------------------------------------------

def _check_windows(windows) -> np.ndarray:
    w = np.asarray(windows, dtype=np.float64)
    if w.size > MAX_EXACT_PACKETS:
        raise ValueError(f"exact mode supports at most {MAX_EXACT_PACKETS} packets, got {w.size}")
    if np.any(w < 2):
        raise ValueError("all windows must be >= 2")
    return w


def exact_slot_probabilities(windows) -> tuple[float, float, float]:
    """(p_empty, p_success, p_noisy) for independent senders with probabilities 1/w."""
    w = _check_windows(windows)
    p = 1.0 / w
    q = 1.0 - p
    p_emp = float(np.prod(q))
    p_suc = 0.0
    for u in range(w.size):
        p_suc += p[u] * float(np.prod(np.delete(q, u)))
    p_noi = max(0.0, 1.0 - p_emp - p_suc)
    return p_emp, p_suc, p_noi


@dataclass(frozen=True)
class BoundsReport:
    C: float
    p_emp: float
    p_suc: float
    p_noi: float
    suc_lower: float
    suc_upper: float
    emp_lower: float
    emp_upper: float
    noi_lower: float

    @property
    def margins(self) -> dict:
        return {
            "suc_lower": self.p_suc - self.suc_lower,
            "suc_upper": self.suc_upper - self.p_suc,
            "emp_lower": self.p_emp - self.emp_lower,
            "emp_upper": self.emp_upper - self.p_emp,
            "noi_lower": self.p_noi - self.noi_lower,
        }

    @property
    def ok(self) -> bool:
        # rounding slack for the cases where a bound is attained exactly
        return all(m >= -1e-12 for m in self.margins.values())


def check_probability_bounds(windows) -> BoundsReport:
    p_emp, p_suc, p_noi = exact_slot_probabilities(windows)
    C = contention(windows)
    return BoundsReport(
        C=C, p_emp=p_emp, p_suc=p_suc, p_noi=p_noi,
        suc_lower=C * math.exp(-2 * C), suc_upper=2 * C * math.exp(-C),
        emp_lower=math.exp(-2 * C), emp_upper=math.exp(-C),
        noi_lower=1 - 2 * C * math.exp(-C) - math.exp(-C),
    )


def expected_H_delta(windows, conditioned_state: str, c: float,
                     w_min: Optional[float] = None) -> float:
    """Exact expected one-slot change of the high-contention term.

    Every packet listens with probability ``c ln^3(w)/w`` and applies the
    update for the given slot state. The per-packet term is normalised as
    ``1/(c ln w)``, the form in which the per-slot drift bounds
    ``-C/(2c)`` (noisy) and ``+2C/c`` (silent) are stated; multiply by ``c``
    to get the change of ``sum 1/ln w``.
    """
    w = np.asarray(windows, dtype=np.float64)
    if w.size == 0:
        return 0.0
    state = conditioned_state.lower()
    if state == "noisy":
        w_next = backed_off(w, c)
    elif state == "silent":
        w_next = w / (1.0 + 1.0 / (c * np.log(w)))
        if w_min is not None:
            w_next = np.maximum(w_next, w_min)
    else:
        raise ValueError(f"conditioned_state must be 'silent' or 'noisy', got {conditioned_state!r}")
    p_listen = listen_probability(w, c)
    if np.any(p_listen > 1.0):
        raise ValueError("listen probability exceeds 1 for some window")
    delta = 1.0 / (c * np.log(w_next)) - 1.0 / (c * np.log(w))
    return float(np.sum(p_listen * delta))


def H_step_ratio(w: float, c: float, state: str) -> float:
    """|change of 1/ln w| after one listen, divided by 1/(c ln^3 w)."""
    if state == "noisy":
        w_next = float(backed_off(w, c))
    else:
        w_next = w / (1.0 + 1.0 / (c * math.log(w)))
    return abs(1.0 / math.log(w_next) - 1.0 / math.log(w)) * c * math.log(w) ** 3


def monte_carlo_slot_frequencies(windows, trials: int, rng: np.random.Generator,
                                 chunk: int = 200_000) -> tuple[float, float, float]:
    """Empirical (empty, success, noisy) frequencies over ``trials`` simulated slots."""
    p = 1.0 / _check_windows(windows)
    counts = np.zeros(3, dtype=np.int64)
    left = int(trials)
    while left > 0:
        m = min(chunk, left)
        senders = (rng.random((m, p.size)) < p).sum(axis=1)
        counts += np.bincount(np.minimum(senders, 2), minlength=3)
        left -= m
    f = counts / float(trials)
    return float(f[0]), float(f[1]), float(f[2])


def random_window_vectors(count: int, n_max: int, w_lo: float, w_hi: float,
                          rng: np.random.Generator, n_min: int = 1) -> list[np.ndarray]:
    """Vectors of 1..n_max windows, log-uniform on [w_lo, w_hi]."""
    out = []
    for _ in range(count):
        n = int(rng.integers(n_min, n_max + 1))
        out.append(np.exp(rng.uniform(math.log(w_lo), math.log(w_hi), size=n)))
    return out
