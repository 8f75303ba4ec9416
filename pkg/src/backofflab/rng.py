"""Counter-based random substreams.

Every entity (packet, adversary, arrival process) owns a key derived from
the master seed and its id. Draw ``i`` of an entity is a pure function of
``(key, i)``, so adding an entity never shifts anybody else's draws and a
whole population can be sampled in one vectorised call.

The mixing function is the SplitMix64 finaliser applied to a Weyl
sequence, i.e. each key is the seed of an ordinary SplitMix64 stream.
"""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

# entity domains, keep ids of different kinds from colliding
PACKET = 0
ADVERSARY = 1
ARRIVALS = 2


def _mix(z: np.ndarray) -> np.ndarray:
    # uint64 array arithmetic wraps silently, which is what we want
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def entity_keys(master_seed: int, entity_ids, domain: int = PACKET) -> np.ndarray:
    """Stream keys for a batch of entity ids (uint64 array)."""
    ids = np.asarray(entity_ids, dtype=np.int64).astype(np.uint64)
    seed = np.uint64(int(master_seed) & _MASK64)
    salt = np.uint64((int(domain) * 0xD1B54A32D192ED03) & _MASK64)
    inner = _mix(ids + salt + _GOLDEN)
    return _mix(np.asarray(seed ^ inner, dtype=np.uint64) + _GOLDEN)


def uniforms(keys: np.ndarray, counter) -> np.ndarray:
    """Draw number ``counter`` of each stream, as float64 in [0, 1).

    ``counter`` may be a scalar or an array broadcastable against ``keys``.
    """
    ctr = np.atleast_1d(np.asarray(counter, dtype=np.uint64))
    z = _mix(keys + (ctr + np.uint64(1)) * _GOLDEN)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


class Substream:
    """Sequential view of one entity's counter-based stream."""

    def __init__(self, master_seed: int, entity_id: int, domain: int = PACKET):
        self.master_seed = int(master_seed)
        self.entity_id = int(entity_id)
        self.domain = int(domain)
        self._key = entity_keys(master_seed, [entity_id], domain)
        self.position = 0

    def at(self, counter) -> np.ndarray:
        return uniforms(self._key, counter)

    def random(self) -> float:
        u = float(uniforms(self._key, self.position)[0])
        self.position += 1
        return u

    def draws(self, n: int) -> np.ndarray:
        out = uniforms(self._key, np.arange(self.position, self.position + n, dtype=np.uint64))
        self.position += n
        return out


def rng_substream(master_seed: int, entity_id: int, domain: int = PACKET) -> Substream:
    return Substream(master_seed, entity_id, domain)
