"""Binary narrow-sense BCH codes over GF(2^z).

Polynomials over GF(2) are held as Python ints (bit i = coefficient of x^i).
Codeword bit i is the coefficient of x^i; encoding is systematic with the
message occupying the high-order positions ``n - k .. n - 1``.

Two decoders are provided: :func:`decode` (scalar, pure Python) and
:func:`decode_batch` (numpy, many words at once). Both run syndrome
computation, Berlekamp-Massey and a Chien search, and behave as
bounded-distance decoders.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

# Primitive polynomials per extension degree (standard low-weight choices).
PRIMITIVE_POLYS: dict[int, int] = {
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10001001,
    8: 0b100011101,
    9: 0b1000010001,
    10: 0b10000001001,
    11: 0b100000000101,
    12: 0b1000001010011,
    13: 0b10000000011011,
    14: 0b100010001000011,
    15: 0b1000000000000011,
    16: 0b10001000000001011,
}


class DecodeFailure(Exception):
    """The received word is not within distance t of any codeword."""


@dataclass(frozen=True, eq=False)
class GaloisField:
    z: int
    primitive_poly: int
    log_table: np.ndarray = field(repr=False)
    antilog_table: np.ndarray = field(repr=False)

    @property
    def order(self) -> int:
        return 1 << self.z

    @property
    def n(self) -> int:
        return (1 << self.z) - 1

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self._exp[self._log[a] + self._log[b]]

    def div(self, a: int, b: int) -> int:
        if b == 0:
            raise ZeroDivisionError("division by zero in GF(2^z)")
        if a == 0:
            return 0
        return self._exp[self._log[a] - self._log[b] + self.n]

    def pow_alpha(self, e: int) -> int:
        return self._exp[e % self.n]

    # list views for the scalar hot paths
    @property
    def _log(self) -> list[int]:
        return self.__dict__["_log_list"]

    @property
    def _exp(self) -> list[int]:
        return self.__dict__["_exp_list"]


def gf_construct(z: int, primitive_poly: int | None = None) -> GaloisField:
    """Build log/antilog tables for GF(2^z).

    Raises ValueError when ``primitive_poly`` is not primitive of degree z
    (the powers of x cycle before visiting every nonzero element).
    """
    if not 3 <= z <= 16:
        raise ValueError(f"extension degree z={z} outside supported range 3..16")
    if primitive_poly is None:
        primitive_poly = PRIMITIVE_POLYS[z]
    if primitive_poly.bit_length() - 1 != z:
        raise ValueError(f"polynomial {primitive_poly:#b} does not have degree {z}")
    n = (1 << z) - 1
    log = [-1] * (n + 1)
    exp = [0] * (2 * n)
    a = 1
    for i in range(n):
        if log[a] != -1:
            raise ValueError(
                f"polynomial {primitive_poly:#b} is not primitive: x has order {i} < {n}"
            )
        exp[i] = a
        log[a] = i
        a <<= 1
        if a >> z:
            a ^= primitive_poly
    if a != 1:
        raise ValueError(f"polynomial {primitive_poly:#b} is not primitive")
    for i in range(n, 2 * n):
        exp[i] = exp[i - n]
    log[0] = 0  # placeholder; callers mask zero operands
    gf = GaloisField(
        z=z,
        primitive_poly=primitive_poly,
        log_table=np.asarray(log, dtype=np.int64),
        antilog_table=np.asarray(exp, dtype=np.int64),
    )
    gf.__dict__["_log_list"] = log
    gf.__dict__["_exp_list"] = exp
    return gf


def _poly_mod(a: int, g: int) -> int:
    dg = g.bit_length() - 1
    while a.bit_length() - 1 >= dg:
        a ^= g << (a.bit_length() - 1 - dg)
    return a


def _poly_mul(a: int, b: int) -> int:
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def _minimal_poly(gf: GaloisField, i: int) -> int:
    """Minimal polynomial over GF(2) of alpha^i, via its cyclotomic coset."""
    n = gf.n
    coset = []
    e = i % n
    while e not in coset:
        coset.append(e)
        e = (2 * e) % n
    # prod (x + alpha^e), coefficients in GF(2^z), lowest degree first
    coeffs = [1]
    for e in coset:
        root = gf.pow_alpha(e)
        nxt = [0] * (len(coeffs) + 1)
        for j, c in enumerate(coeffs):
            nxt[j + 1] ^= c
            nxt[j] ^= gf.mul(c, root)
        coeffs = nxt
    out = 0
    for j, c in enumerate(coeffs):
        if c not in (0, 1):
            raise AssertionError("minimal polynomial has non-binary coefficient")
        out |= c << j
    return out


def _coset_leader(n: int, i: int) -> int:
    e, best = i % n, i % n
    while True:
        e = (2 * e) % n
        if e == i % n:
            return best
        best = min(best, e)


def generator_poly(gf: GaloisField, t: int) -> int:
    """LCM of the minimal polynomials of alpha^1 .. alpha^(2t)."""
    g = 1
    seen = set()
    for i in range(1, 2 * t + 1):
        leader = _coset_leader(gf.n, i)
        if leader in seen:
            continue
        seen.add(leader)
        g = _poly_mul(g, _minimal_poly(gf, leader))
    return g


@dataclass(frozen=True, eq=False)
class BchCode:
    n: int
    k: int
    t: int
    generator_poly: int
    field: GaloisField = field(repr=False)

    @property
    def parity_bits(self) -> int:
        return self.n - self.k

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BchCode):
            return NotImplemented
        return (self.n, self.k, self.t, self.generator_poly) == (
            other.n,
            other.k,
            other.t,
            other.generator_poly,
        )

    def __hash__(self) -> int:
        return hash((self.n, self.k, self.t, self.generator_poly))


@lru_cache(maxsize=None)
def bch_construct(n: int, k: int) -> BchCode:
    """Return the narrow-sense binary BCH code of length n and dimension k.

    The reported t is the largest designed capability whose generator has
    degree ``n - k``.
    """
    z = (n + 1).bit_length() - 1
    if n + 1 != 1 << z or not 3 <= z <= 16:
        raise ValueError(f"n={n} is not 2^z - 1 for a supported z")
    if not 0 < k < n:
        raise ValueError(f"(n, k) = ({n}, {k}) requests no error-correcting capability")
    gf = gf_construct(z)
    target = n - k
    best = None
    t = 1
    while True:
        g = generator_poly(gf, t)
        deg = g.bit_length() - 1
        if deg == target:
            best = (t, g)
        elif deg > target:
            break
        t += 1
    if best is None:
        raise ValueError(f"(n, k) = ({n}, {k}) is not a narrow-sense binary BCH pair")
    t, g = best
    return BchCode(n=n, k=k, t=t, generator_poly=g, field=gf)


def supported_pairs(z: int) -> list[tuple[int, int, int]]:
    """All (n, k, t) narrow-sense binary BCH parameter triples for degree z."""
    gf = gf_construct(z)
    n = gf.n
    out: dict[int, int] = {}
    t = 1
    while True:
        deg = generator_poly(gf, t).bit_length() - 1
        if deg >= n:
            break
        out[n - deg] = t
        t += 1
    return sorted(((n, k, t) for k, t in out.items()), key=lambda x: -x[1])


# -- bit helpers -------------------------------------------------------------

def _bits_to_int(bits) -> int:
    arr = np.asarray(bits, dtype=np.uint8)
    return int.from_bytes(np.packbits(arr, bitorder="little").tobytes(), "little")


def _int_to_bits(value: int, length: int) -> np.ndarray:
    raw = value.to_bytes((length + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:length].copy()


def encode(code: BchCode, m) -> np.ndarray:
    m = np.asarray(m, dtype=np.uint8)
    if m.shape != (code.k,):
        raise ValueError(f"message must have {code.k} bits, got shape {m.shape}")
    shifted = _bits_to_int(m) << code.parity_bits
    c = shifted ^ _poly_mod(shifted, code.generator_poly)
    return _int_to_bits(c, code.n)


@lru_cache(maxsize=None)
def _generator_matrix(code: BchCode) -> np.ndarray:
    eye = np.eye(code.k, dtype=np.uint8)
    return np.stack([encode(code, row) for row in eye])


def encode_batch(code: BchCode, messages) -> np.ndarray:
    """Encode a (B, k) array of messages; returns (B, n)."""
    msgs = np.asarray(messages, dtype=np.uint8)
    if msgs.ndim != 2 or msgs.shape[1] != code.k:
        raise ValueError(f"messages must have shape (B, {code.k})")
    G = _generator_matrix(code).astype(np.int32)
    return ((msgs.astype(np.int32) @ G) & 1).astype(np.uint8)


def syndromes(code: BchCode, word) -> list[int]:
    """S_1 .. S_2t of a received word (list of field elements)."""
    gf = code.field
    exp, n = gf._exp, gf.n
    positions = np.flatnonzero(np.asarray(word, dtype=np.uint8)).tolist()
    S = [0] * (2 * code.t)
    for j in range(1, 2 * code.t + 1):
        if j % 2 == 0:
            S[j - 1] = gf.mul(S[j // 2 - 1], S[j // 2 - 1])
            continue
        acc = 0
        for i in positions:
            acc ^= exp[(i * j) % n]
        S[j - 1] = acc
    return S


def _berlekamp_massey(gf: GaloisField, S: list[int]) -> tuple[list[int], int]:
    C = [1] + [0] * len(S)
    B = [1] + [0] * len(S)
    L, m, b = 0, 1, 1
    for r in range(len(S)):
        d = S[r]
        for i in range(1, L + 1):
            d ^= gf.mul(C[i], S[r - i])
        if d == 0:
            m += 1
            continue
        coef = gf.div(d, b)
        T = C[:]
        for j in range(len(C) - m):
            if B[j]:
                C[j + m] ^= gf.mul(coef, B[j])
        if 2 * L <= r:
            L, B, b, m = r + 1 - L, T, d, 1
        else:
            m += 1
    return C, L


def decode(code: BchCode, c_prime) -> tuple[np.ndarray, int]:
    """Bounded-distance decode. Returns ``(message, corrected_count)``.

    Raises DecodeFailure when the error locator has the wrong degree or its
    roots do not match that degree.
    """
    word = np.asarray(c_prime, dtype=np.uint8)
    if word.shape != (code.n,):
        raise ValueError(f"received word must have {code.n} bits, got shape {word.shape}")
    S = syndromes(code, word)
    if not any(S):
        return word[code.parity_bits:].copy(), 0
    gf = code.field
    C, L = _berlekamp_massey(gf, S)
    deg = max(i for i, c in enumerate(C) if c)
    if L > code.t or deg != L:
        raise DecodeFailure(f"error locator degree {deg} (L={L}) exceeds t={code.t}")
    exp, log, n = gf._exp, gf._log, gf.n
    terms = [(j, log[c]) for j, c in enumerate(C) if c]
    roots = []
    for i in range(n):
        acc = 0
        for j, lc in terms:
            acc ^= exp[(lc - i * j) % n]
        if acc == 0:
            roots.append(i)
    if len(roots) != L:
        raise DecodeFailure(f"locator of degree {L} has {len(roots)} roots")
    fixed = word.copy()
    fixed[roots] ^= 1
    return fixed[code.parity_bits:].copy(), L


# -- vectorized decoder --------------------------------------------------------

def _vmul(gf: GaloisField, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = gf.antilog_table[gf.log_table[a] + gf.log_table[b]]
    return np.where((a == 0) | (b == 0), 0, out)


def _element_bits(values: np.ndarray, z: int) -> np.ndarray:
    return ((values[..., None] >> np.arange(z)) & 1).astype(np.float32)


@lru_cache(maxsize=None)
def _syndrome_matrix(code: BchCode) -> np.ndarray:
    """(n, t*z) GF(2) matrix mapping a word to the bits of its odd syndromes."""
    n, z = code.n, code.field.z
    js = np.arange(1, 2 * code.t + 1, 2)
    elems = code.field.antilog_table[np.outer(np.arange(n), js) % n]  # (n, t)
    return _element_bits(elems, z).reshape(n, -1)


@lru_cache(maxsize=None)
def _chien_matrix(code: BchCode) -> np.ndarray:
    """((t+1)*z, n*z) GF(2) matrix: locator coefficient bits to the bits of
    Lambda(alpha^-i) for every position i."""
    n, z, t = code.n, code.field.z, code.t
    j = np.arange(t + 1)[:, None, None]
    l = np.arange(z)[None, :, None]
    i = np.arange(n)[None, None, :]
    elems = code.field.antilog_table[(l - i * j) % n]  # (t+1, z, n)
    return _element_bits(elems, z).reshape((t + 1) * z, n * z)


def _pack_elements(bits: np.ndarray, z: int) -> np.ndarray:
    return (bits.astype(np.int64) << np.arange(z)).sum(axis=-1)


def _decode_chunk(code: BchCode, words: np.ndarray):
    gf = code.field
    n, t, B = code.n, code.t, words.shape[0]
    two_t = 2 * t
    z = gf.z
    S = np.zeros((B, two_t), dtype=np.int64)
    odd = (words.astype(np.float32) @ _syndrome_matrix(code)).astype(np.int64) & 1
    S[:, 0::2] = _pack_elements(odd.reshape(B, t, z), z)
    for j in range(2, two_t + 1, 2):
        S[:, j - 1] = _vmul(gf, S[:, j // 2 - 1], S[:, j // 2 - 1])

    W = two_t + 2
    C = np.zeros((B, W), dtype=np.int64)
    C[:, 0] = 1
    Bp = C.copy()
    L = np.zeros(B, dtype=np.int64)
    m = np.ones(B, dtype=np.int64)
    b = np.ones(B, dtype=np.int64)
    cols = np.arange(W)[None, :]
    for r in range(two_t):
        d = S[:, r].copy()
        if r > 0:
            prods = _vmul(gf, C[:, 1 : r + 1], S[:, r - 1 :: -1][:, :r])
            d ^= np.bitwise_xor.reduce(prods, axis=1)
        nz = d != 0
        safe_b = np.where(b == 0, 1, b)
        coef = np.where(
            nz,
            gf.antilog_table[gf.log_table[d] - gf.log_table[safe_b] + n],
            0,
        )
        src = cols - m[:, None]
        Bs = np.where(src >= 0, np.take_along_axis(Bp, np.clip(src, 0, W - 1), axis=1), 0)
        newC = C ^ _vmul(gf, coef[:, None], Bs)
        upd = nz & (2 * L <= r)
        Bp = np.where(upd[:, None], C, Bp)
        b = np.where(upd, d, b)
        L = np.where(upd, r + 1 - L, L)
        C = np.where(nz[:, None], newC, C)
        m = np.where(upd, 1, m + 1)

    nzC = C != 0
    deg = W - 1 - np.argmax(nzC[:, ::-1], axis=1)
    ok = (L <= t) & (deg == L)
    clean = ~S.any(axis=1)

    fixed = words.copy()
    corrected = np.zeros(B, dtype=np.int64)
    rows = np.flatnonzero(ok & ~clean)
    if rows.size:
        Cr = C[rows, : t + 1]
        evals = (_element_bits(Cr, z).reshape(rows.size, -1) @ _chien_matrix(code)).astype(np.int64) & 1
        roots = ~evals.reshape(rows.size, n, z).any(axis=2)
        nroots = roots.sum(axis=1)
        good = nroots == L[rows]
        fixed[rows[good]] ^= roots[good].astype(np.uint8)
        corrected[rows[good]] = L[rows[good]]
        ok[rows[~good]] = False
    ok |= clean
    return fixed[:, code.parity_bits:], corrected, ok


def decode_batch(code: BchCode, words, chunk: int = 4096):
    """Decode a (B, n) array of received words.

    Returns ``(messages, corrected, ok)``; rows with ``ok == False`` are
    decode failures and their message rows are meaningless.
    """
    arr = np.asarray(words, dtype=np.uint8)
    if arr.ndim != 2 or arr.shape[1] != code.n:
        raise ValueError(f"words must have shape (B, {code.n})")
    msgs, corr, oks = [], [], []
    for start in range(0, arr.shape[0], chunk):
        mm, cc, oo = _decode_chunk(code, arr[start : start + chunk])
        msgs.append(mm)
        corr.append(cc)
        oks.append(oo)
    if not msgs:
        return (
            np.zeros((0, code.k), dtype=np.uint8),
            np.zeros(0, dtype=np.int64),
            np.zeros(0, dtype=bool),
        )
    return np.concatenate(msgs), np.concatenate(corr), np.concatenate(oks)
