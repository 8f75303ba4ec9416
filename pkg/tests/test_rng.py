import numpy as np

from backofflab.rng import ADVERSARY, PACKET, entity_keys, rng_substream, uniforms


def test_same_stream_repeats():
    a = rng_substream(123, 7).draws(1000)
    b = rng_substream(123, 7).draws(1000)
    assert np.array_equal(a, b)


def test_sequential_and_random_access_agree():
    s = rng_substream(5, 2)
    seq = np.array([s.random() for _ in range(50)])
    assert np.array_equal(seq, rng_substream(5, 2).at(np.arange(50, dtype=np.uint64)))


def test_streams_uncorrelated():
    a = rng_substream(99, 1).draws(10 ** 5)
    b = rng_substream(99, 2).draws(10 ** 5)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01
    # lag-1 autocorrelation within a stream
    assert abs(np.corrcoef(a[:-1], a[1:])[0, 1]) < 0.01


def test_uniform_range_and_moments():
    u = rng_substream(0, 0).draws(10 ** 5)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 3 * np.sqrt(1 / 12 / u.size)


def test_domains_and_seeds_separate_streams():
    k = entity_keys(1, [0, 1, 2], PACKET)
    assert len(set(k.tolist())) == 3
    assert not np.array_equal(k, entity_keys(1, [0, 1, 2], ADVERSARY))
    assert not np.array_equal(k, entity_keys(2, [0, 1, 2], PACKET))


def test_adding_entities_does_not_shift_draws():
    small = uniforms(entity_keys(8, np.arange(3)), 17)
    big = uniforms(entity_keys(8, np.arange(1000)), 17)
    assert np.array_equal(small, big[:3])


def _splitmix_reference(master_seed, entity_id, domain, counter):
    """Plain-integer re-implementation of the stream construction."""
    M = (1 << 64) - 1
    G = 0x9E3779B97F4A7C15

    def mix(z):
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M
        return z ^ (z >> 31)

    salt = (domain * 0xD1B54A32D192ED03) & M
    inner = mix((entity_id + salt + G) & M)
    key = mix(((master_seed & M) ^ inner) + G & M)
    z = mix((key + (counter + 1) * G) & M)
    return (z >> 11) / 2.0 ** 53


def test_matches_integer_reference():
    for seed, eid, dom in [(2024, 0, PACKET), (1, 12345, PACKET), (2 ** 64 - 1, 3, ADVERSARY)]:
        got = rng_substream(seed, eid, dom).draws(20)
        want = [_splitmix_reference(seed, eid, dom, i) for i in range(20)]
        assert got.tolist() == want
