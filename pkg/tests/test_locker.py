import hashlib
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaitkey import locker
from gaitkey.locker import LockedPoint, canonical_key, d_lock, d_unlock, expand, op_lock, op_unlock

bits = st.lists(st.integers(0, 1), max_size=200).map(lambda b: np.array(b, dtype=np.uint8))


def test_expand_known_answer():
    seed = b"abc"
    want = hashlib.sha256(b"abc" + struct.pack("<I", 0)).digest() + hashlib.sha256(b"abc" + struct.pack("<I", 1)).digest()
    assert expand(seed, 512) == int.from_bytes(want, "little")
    assert expand(seed, 10) == int.from_bytes(want, "little") & 0x3FF


def test_canonical_key_is_length_prefixed():
    assert canonical_key([0, 1]) != canonical_key([0, 1, 0])
    assert canonical_key([1, 0, 1]) == struct.pack("<I", 3) + bytes([0b101])
    assert canonical_key([]) == struct.pack("<I", 0)


@settings(max_examples=80, deadline=None)
@given(key=bits, value=bits, gamma=st.sampled_from([8, 32, 128]))
def test_roundtrip(key, value, gamma):
    point = d_lock(key, value, gamma)
    out = d_unlock(key, point, gamma)
    assert out is not None and np.array_equal(out, value)


def test_wrong_key_rejected():
    rng = np.random.default_rng(0)
    key = rng.integers(0, 2, 64).astype(np.uint8)
    point = d_lock(key, [1, 0, 1, 1], rng=rng)
    other = key.copy()
    other[5] ^= 1
    assert d_unlock(other, point) is None
    assert d_unlock(key[:-1], point) is None


def test_seeded_lock_is_deterministic_and_unseeded_is_not():
    a = d_lock([1, 1], [0, 1], rng=np.random.default_rng(4))
    b = d_lock([1, 1], [0, 1], rng=np.random.default_rng(4))
    assert a == b
    assert d_lock([1, 1], [0, 1]).nonce != d_lock([1, 1], [0, 1]).nonce


def test_false_accept_rate_gamma_8():
    """Wrong-key acceptance of a point function at gamma = 8 is about 2^-8."""
    rng = np.random.default_rng(5)
    trials = 40_000
    point = op_lock([1, 0], gamma=8, rng=rng)
    accepts = 0
    for i in range(trials):
        accepts += locker._unlock_raw(struct.pack("<Q", i + 1), point, 8) is not None
    p = 2**-8
    sigma = np.sqrt(p * (1 - p) / trials)
    assert abs(accepts / trials - p) < 4 * sigma


def test_op_unlock():
    point = op_lock([1, 0, 1], gamma=16)
    assert op_unlock([1, 0, 1], point, 16)
    assert not op_unlock([1, 0, 0], point, 16)
    with pytest.raises(ValueError):
        op_unlock([1, 0, 1], d_lock([1], [1], 16), 16)


def test_point_bytes_roundtrip_and_truncation():
    p = d_lock([1, 0, 1], [1] * 13, gamma=20)
    buf = p.to_bytes()
    q, off = LockedPoint.from_bytes(buf)
    assert q == p and off == len(buf)
    with pytest.raises(ValueError):
        LockedPoint.from_bytes(buf[:-1])
    with pytest.raises(ValueError):
        LockedPoint.from_bytes(buf[:10])
    # nonzero padding in the final byte is rejected (33 bits -> 7 pad bits)
    bad = bytearray(buf)
    bad[-1] |= 0x80
    with pytest.raises(ValueError):
        LockedPoint.from_bytes(bytes(bad))


def test_gamma_validation():
    with pytest.raises(ValueError):
        d_lock([1], [1], gamma=0)
    point = d_lock([1], [], gamma=8)
    with pytest.raises(ValueError):
        d_unlock([1], point, gamma=16)
