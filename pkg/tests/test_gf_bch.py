import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaitkey.gf_bch import (
    DecodeFailure,
    bch_construct,
    decode,
    decode_batch,
    encode,
    encode_batch,
    gf_construct,
    supported_pairs,
    syndromes,
)


def clmul_mod(a, b, poly, z):
    """Carry-less multiply then reduce: GF(2^z) product without tables."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    for bit in range(out.bit_length() - 1, z - 1, -1):
        if out >> bit & 1:
            out ^= poly << (bit - z)
    return out


def poly_eval_gf(gf, coeff_bits, x):
    """Evaluate a binary polynomial (int, bit i = x^i) at field element x by Horner."""
    acc = 0
    for i in range(coeff_bits.bit_length() - 1, -1, -1):
        acc = clmul_mod(acc, x, gf.primitive_poly, gf.z) ^ (coeff_bits >> i & 1)
    return acc


def bits_to_int(bits):
    return sum(int(b) << i for i, b in enumerate(bits))


@pytest.mark.parametrize("z", [3, 4, 5, 8])
def test_field_mul_matches_carryless_oracle(z):
    gf = gf_construct(z)
    rng = np.random.default_rng(z)
    for a, b in rng.integers(0, 1 << z, size=(300, 2)).tolist():
        assert gf.mul(a, b) == clmul_mod(a, b, gf.primitive_poly, z)


def test_field_division_inverts_multiplication():
    gf = gf_construct(8)
    for a in range(1, 256, 7):
        for b in range(1, 256, 11):
            assert gf.div(gf.mul(a, b), b) == a
    with pytest.raises(ZeroDivisionError):
        gf.div(3, 0)


def test_non_primitive_polynomial_rejected():
    # x^4 + x^3 + x^2 + x + 1 is irreducible but alpha has order 5
    with pytest.raises(ValueError):
        gf_construct(4, 0b11111)
    with pytest.raises(ValueError):
        gf_construct(4, 0b1011)  # wrong degree


@pytest.mark.parametrize(
    "n,k,t,g",
    [
        (15, 11, 1, 0b10011),
        (15, 7, 2, 0b111010001),
        (15, 5, 3, 0b10100110111),
        (7, 4, 1, 0b1011),
    ],
)
def test_textbook_generators(n, k, t, g):
    code = bch_construct(n, k)
    assert (code.t, code.generator_poly) == (t, g)


@pytest.mark.parametrize("k,t", [(115, 21), (123, 19), (131, 18), (139, 15), (147, 14)])
def test_length_255_codes(k, t):
    code = bch_construct(255, k)
    assert code.t == t
    gf = code.field
    # generator has alpha^1..alpha^(2t) as roots
    for i in range(1, 2 * t + 1):
        assert poly_eval_gf(gf, code.generator_poly, gf.pow_alpha(i)) == 0
    # and divides x^n - 1
    rem = (1 << 255) | 1
    g = code.generator_poly
    while rem.bit_length() >= g.bit_length():
        rem ^= g << (rem.bit_length() - g.bit_length())
    assert rem == 0


def test_supported_pairs_z4():
    assert supported_pairs(4) == [(15, 11, 1), (15, 7, 2), (15, 5, 3), (15, 1, 7)]


@pytest.mark.parametrize("n,k", [(255, 0), (255, 255), (100, 50), (255, 130)])
def test_invalid_pairs(n, k):
    with pytest.raises(ValueError):
        bch_construct(n, k)


def test_encoding_is_systematic_and_divisible():
    code = bch_construct(63, 45)
    rng = np.random.default_rng(1)
    for _ in range(20):
        m = rng.integers(0, 2, code.k).astype(np.uint8)
        c = encode(code, m)
        assert np.array_equal(c[code.n - code.k :], m)
        rem = bits_to_int(c)
        g = code.generator_poly
        while rem and rem.bit_length() >= g.bit_length():
            rem ^= g << (rem.bit_length() - g.bit_length())
        assert rem == 0
        assert not any(syndromes(code, c))


def test_encode_batch_matches_scalar():
    code = bch_construct(127, 92)
    rng = np.random.default_rng(2)
    M = rng.integers(0, 2, (50, code.k)).astype(np.uint8)
    C = encode_batch(code, M)
    for m, c in zip(M, C):
        assert np.array_equal(c, encode(code, m))


def _all_codewords(code):
    msgs = np.array(list(itertools.product([0, 1], repeat=code.k)), dtype=np.uint8)
    return msgs, encode_batch(code, msgs)


def test_toy_code_exhaustive_within_t():
    code = bch_construct(15, 5)
    msgs, cws = _all_codewords(code)
    for m, c in zip(msgs, cws):
        for w in range(code.t + 1):
            for pos in itertools.combinations(range(15), w):
                r = c.copy()
                r[list(pos)] ^= 1
                got, corrected = decode(code, r)
                assert np.array_equal(got, m) and corrected == w


def test_toy_code_beyond_t_matches_nearest_codeword_oracle():
    """Every word of length 15: the decoder succeeds exactly when a codeword
    lies within distance t, and then returns that codeword's message."""
    code = bch_construct(15, 5)
    msgs, cws = _all_codewords(code)
    words = np.array(list(itertools.product([0, 1], repeat=15)), dtype=np.uint8)
    dist = (words[:, None, :] != cws[None, :, :]).sum(axis=2)
    nearest = dist.argmin(axis=1)
    within = dist.min(axis=1) <= code.t
    got, corrected, ok = decode_batch(code, words)
    assert np.array_equal(ok, within)
    assert np.array_equal(got[ok], msgs[nearest[ok]])
    assert np.array_equal(corrected[ok], dist.min(axis=1)[ok])
    # scalar decoder on a sample
    for idx in range(0, words.shape[0], 97):
        if within[idx]:
            assert np.array_equal(decode(code, words[idx])[0], msgs[nearest[idx]])
        else:
            with pytest.raises(DecodeFailure):
                decode(code, words[idx])


def test_batch_and_scalar_agree_on_255():
    code = bch_construct(255, 139)
    rng = np.random.default_rng(3)
    m = rng.integers(0, 2, (300, code.k)).astype(np.uint8)
    W = encode_batch(code, m)
    for r in range(300):
        W[r, rng.choice(255, rng.integers(0, 2 * code.t + 4), replace=False)] ^= 1
    M, C, OK = decode_batch(code, W, chunk=64)
    for r in range(300):
        try:
            mm, cc = decode(code, W[r])
        except DecodeFailure:
            assert not OK[r]
            continue
        assert OK[r] and cc == C[r] and np.array_equal(mm, M[r])


def test_decode_rejects_wrong_length():
    code = bch_construct(15, 7)
    with pytest.raises(ValueError):
        decode(code, np.zeros(14, dtype=np.uint8))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_property_roundtrip_up_to_t(data):
    n, k = data.draw(st.sampled_from([(31, 21), (63, 36), (127, 64), (255, 131)]))
    code = bch_construct(n, k)
    m = np.array(data.draw(st.lists(st.integers(0, 1), min_size=k, max_size=k)), dtype=np.uint8)
    pos = data.draw(st.lists(st.integers(0, n - 1), unique=True, max_size=code.t))
    r = encode(code, m)
    r[pos] ^= 1
    got, corrected = decode(code, r)
    assert np.array_equal(got, m) and corrected == len(pos)
