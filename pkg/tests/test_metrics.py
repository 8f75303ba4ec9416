import itertools
import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from backofflab.metrics import (ContentionClass, IntervalLedger, MetricsAccumulator,
                                PotentialParams, H_step_ratio, check_probability_bounds,
                                classify_contention, contention, exact_slot_probabilities,
                                expected_H_delta, implicit_throughput, interval_length,
                                min_interval_length, monte_carlo_slot_frequencies, potential,
                                random_window_vectors, throughput)
from backofflab.policy import ConfigError, min_valid_w_min

mp.mp.dps = 40
E2 = float(mp.e ** 2)
E4 = float(mp.e ** 4)


def brute_force(windows):
    """Enumerate all 2^n send patterns with exact rational arithmetic."""
    ps = [Fraction(1) / Fraction(w) for w in windows]
    out = [Fraction(0)] * 3
    for pattern in itertools.product((0, 1), repeat=len(ps)):
        pr = Fraction(1)
        for p, s in zip(ps, pattern):
            pr *= p if s else 1 - p
        out[min(sum(pattern), 2)] += pr
    return [float(x) for x in out]


def test_contention_examples():
    assert contention([2]) == 0.5
    assert contention([]) == 0.0
    assert contention([2, 2]) == 1.0


def test_classification():
    p = PotentialParams().resolved(128.0)
    assert classify_contention(p.c_low, p) is ContentionClass.GOOD
    assert classify_contention(0.0, p) is ContentionClass.LOW
    assert classify_contention(p.c_high + 1e-9, p) is ContentionClass.HIGH
    assert classify_contention(p.c_high, p) is ContentionClass.GOOD
    assert p.c_low == 1 / 256


def test_potential_params_validation():
    with pytest.raises(ConfigError):
        PotentialParams(alpha1=1, alpha2=2).resolved(128.0)
    with pytest.raises(ConfigError):
        PotentialParams(c_low=0.5).resolved(128.0)
    with pytest.raises(ConfigError):
        PotentialParams(c_high=0.9).resolved(128.0)


def test_potential_examples():
    ones = PotentialParams(alpha1=1.0, alpha2=1.0, alpha3=1.0)
    assert potential([], ones).phi == 0.0
    snap = potential([E2], ones)
    assert snap.N == 1 and snap.H == pytest.approx(0.5, rel=1e-15)
    assert snap.L == pytest.approx(1.8472640247326625568, rel=1e-14)
    assert snap.phi == pytest.approx(3.3472640247326625568, rel=1e-14)
    assert snap.phi == pytest.approx(3.34727, abs=2e-5)
    two = potential([E2, E2], ones)
    assert two.L == snap.L and two.H == pytest.approx(2 * snap.H)


@given(st.lists(st.floats(min_value=128.0, max_value=1e9), min_size=1, max_size=30))
def test_phi_at_least_alpha1_n(ws):
    p = PotentialParams()
    snap = potential(ws, p)
    assert snap.phi >= p.alpha1 * len(ws)
    assert snap.w_max == max(ws)


def test_interval_length_examples():
    p1 = PotentialParams(c_tau=1.0)
    assert min_interval_length(128.0) == 6
    assert interval_length(128.0, 1, PotentialParams(), 128.0) == 6
    # w_max = e^4: L = e^4 / 16 = 3.41 -> ceil 4
    assert interval_length(E4, 1, p1, 128.0) == max(4, 6)
    assert interval_length(E4, 1, p1, math.exp(3)) == 4
    assert interval_length(30.0, 10 ** 4, p1, 128.0) == 100
    with pytest.raises(ValueError):
        interval_length(128.0, 0, p1, 128.0)


def test_throughput_formulas():
    acc = MetricsAccumulator(T=5, S=10)
    assert throughput(acc) == 0.5
    assert throughput(MetricsAccumulator(T=3, J=2, S=10)) == 0.5
    assert implicit_throughput(MetricsAccumulator(N=10, S=10)) == 1.0
    assert throughput(MetricsAccumulator()) is None
    assert implicit_throughput(MetricsAccumulator()) is None
    acc = MetricsAccumulator()
    acc.record(3, True, False, True)
    acc.record(0, True, True, False)
    assert (acc.T, acc.S, acc.N, acc.J, acc.t) == (1, 2, 3, 1, 2)


def test_exact_probabilities_examples():
    assert exact_slot_probabilities([2, 2]) == (0.25, 0.5, 0.25)
    assert exact_slot_probabilities([2]) == (0.5, 0.5, 0.0)
    assert exact_slot_probabilities([]) == (1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        exact_slot_probabilities([2.0] * 26)
    with pytest.raises(ValueError):
        exact_slot_probabilities([1.5])


def test_exact_probabilities_match_enumeration():
    rng = np.random.default_rng(2)
    for _ in range(60):
        n = int(rng.integers(1, 11))
        ws = [int(x) for x in rng.integers(2, 40, size=n)]
        got = exact_slot_probabilities(ws)
        want = brute_force(ws)
        assert got == pytest.approx(want, abs=1e-14)
        assert abs(sum(got) - 1) <= 1e-12


def test_bounds_example():
    rep = check_probability_bounds([2, 2])
    assert rep.C == 1.0 and rep.ok
    assert rep.suc_lower == pytest.approx(0.13533528323661269189, rel=1e-14)
    assert rep.suc_upper == pytest.approx(0.73575888234288464319, rel=1e-14)
    assert rep.emp_lower <= rep.p_emp <= rep.emp_upper


def test_bounds_singleton_limit():
    rep = check_probability_bounds([1e12])
    assert rep.ok and rep.p_suc < 1e-11 and rep.suc_lower < 1e-11


@settings(max_examples=300)
@given(st.lists(st.floats(min_value=2.0, max_value=1e6), min_size=1, max_size=12))
def test_bounds_hold(ws):
    rep = check_probability_bounds(ws)
    assert rep.ok, rep.margins


def test_monte_carlo_two_packets():
    f = monte_carlo_slot_frequencies([2, 2], 10 ** 6, np.random.default_rng(0))
    for got, p in zip(f, (0.25, 0.5, 0.25)):
        assert abs(got - p) <= 3 * math.sqrt(p * (1 - p) / 1e6)


def _hdelta_reference(ws, state, c, w_min=None):
    total = mp.mpf(0)
    for w in ws:
        w = mp.mpf(w)
        f = 1 + 1 / (c * mp.log(w))
        nxt = w * f if state == "noisy" else w / f
        if state == "silent" and w_min is not None:
            nxt = max(nxt, mp.mpf(w_min))
        total += c * mp.log(w) ** 3 / w * (1 / (c * mp.log(nxt)) - 1 / (c * mp.log(w)))
    return float(total)


def test_hdelta_single_packet():
    d = expected_H_delta([1000.0], "noisy", 2.0)
    assert d == pytest.approx(-0.00047789809923730514165, rel=1e-12)
    assert d <= -0.001 / 4
    assert expected_H_delta([], "noisy", 2.0) == 0.0


def test_hdelta_matches_reference_and_bounds():
    rng = np.random.default_rng(3)
    for c in (2.0, 4.0, 8.0):
        for ws in random_window_vectors(30, 12, min_valid_w_min(c), 1e6, rng):
            C = contention(ws)
            noisy = expected_H_delta(ws, "noisy", c)
            silent = expected_H_delta(ws, "silent", c)
            assert noisy == pytest.approx(_hdelta_reference(ws, "noisy", c), rel=1e-10)
            assert silent == pytest.approx(_hdelta_reference(ws, "silent", c), rel=1e-10)
            assert noisy <= -C / (2 * c)
            assert silent <= 2 * C / c


def test_hdelta_rejects_bad_input():
    with pytest.raises(ValueError):
        expected_H_delta([100.0], "noisy", 8.0)   # listen probability above 1
    with pytest.raises(ValueError):
        expected_H_delta([1000.0], "success", 2.0)


def test_hdelta_silent_floor():
    w_min = 512.0
    floored = expected_H_delta([w_min], "silent", 2.0, w_min=w_min)
    assert floored == 0.0
    assert floored == _hdelta_reference([w_min], "silent", 2.0, w_min)


def test_step_ratio_range():
    for c in (2.0, 4.0, 8.0):
        for w in np.geomspace(min_valid_w_min(c), 1e9, 50):
            for state in ("noisy", "silent"):
                assert 0.2 <= H_step_ratio(w, c, state) <= 5


def test_ledger_closes_after_tau_and_on_drain():
    params = PotentialParams().resolved(128.0)
    led = IntervalLedger(params, 128.0)
    snap = potential([128.0], params)
    tau = interval_length(128.0, 1, params, 128.0)
    for t in range(1, tau + 1):
        led.begin_slot(t, snap, 1 if t == 1 else 0)
        led.end_slot(False, ContentionClass.GOOD, snap)
    assert len(led.intervals) == 1 and led.intervals[0].length == tau
    assert led.intervals[0].arrivals == 0   # the opening slot's own injection is not counted
    led.begin_slot(tau + 1, snap, 0)
    led.end_slot(True, ContentionClass.LOW, potential([], params))
    iv = led.intervals[1]
    assert iv.length == 1 and iv.jams == 1 and iv.low == 1 and iv.phi_end == 0.0
    assert led.current is None
