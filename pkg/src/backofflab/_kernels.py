"""Compiled inner loops. Each mirrors a numpy reference in rng/policy/metrics."""
from __future__ import annotations

import math

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _uniform(key, counter):
    z = key + (np.uint64(counter) + np.uint64(1)) * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    z = z ^ (z >> np.uint64(31))
    return float(z >> np.uint64(11)) * _INV53


@njit(cache=True)
def lowsense_decide(keys, w, c, t, listen, send):
    """Fill listen/send for slot t; returns the number of senders."""
    n_send = 0
    ctr = 2 * t
    for i in range(keys.size):
        l3 = math.log(w[i]) ** 3
        if _uniform(keys[i], ctr) < c * l3 / w[i]:
            listen[i] = True
            s = _uniform(keys[i], ctr + 1) < 1.0 / (c * l3)
            send[i] = s
            n_send += s
        else:
            listen[i] = False
            send[i] = False
    return n_send


@njit(cache=True)
def window_stats(w):
    """(sum 1/w, sum 1/ln w, max w)."""
    C = 0.0
    H = 0.0
    wmax = 0.0
    for x in w:
        C += 1.0 / x
        H += 1.0 / math.log(x)
        if x > wmax:
            wmax = x
    return C, H, wmax
