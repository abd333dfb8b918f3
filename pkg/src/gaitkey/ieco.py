"""ECO baseline and the IECO key-binding scheme.

ECO locks either the biometric symbol or a uniform decoy per codeword bit and
hands out the ECC message ``m`` as the key. IECO draws an independent key
``kappa``, locks it under ``m`` with a digital locker, and samples decoys from
the symbol space minus the genuine symbol, so an exact string always
reproduces the exact codeword.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import locker
from .gf_bch import BchCode, DecodeFailure, bch_construct, decode, decode_batch, encode
from .locker import DEFAULT_GAMMA, LockedPoint
from .template import PipelineMeta, SymbolString

HELPER_VERSION = 1


@dataclass(frozen=True)
class HelperData:
    points: tuple[LockedPoint, ...]
    key_locker: LockedPoint
    n: int
    k: int
    phi: int
    gamma: int
    rp_seed: int = 0
    N: int = 0
    K: int = 0
    reliable_indices: tuple[int, ...] = ()
    version: int = HELPER_VERSION

    def __post_init__(self):
        if len(self.points) != self.n:
            raise ValueError(f"expected {self.n} locked points, got {len(self.points)}")
        idx = self.reliable_indices
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("reliable indices must be strictly increasing")
        if idx and (idx[0] < 0 or idx[-1] >= self.K):
            raise ValueError("reliable index out of range for K")

    @property
    def key_bits(self) -> int:
        return self.key_locker.bit_length - self.gamma

    @property
    def meta(self) -> PipelineMeta:
        return PipelineMeta(self.rp_seed, self.N, self.K, self.reliable_indices)

    def code(self) -> BchCode:
        return bch_construct(self.n, self.k)


@lru_cache(maxsize=None)
def _symbol_keys(phi: int) -> tuple[bytes, ...]:
    shifts = np.arange(phi - 1, -1, -1)
    return tuple(locker.canonical_key((v >> shifts) & 1) for v in range(1 << phi))


def _check_string(s: SymbolString, code: BchCode) -> None:
    if len(s) != code.n:
        raise ValueError(f"symbol string has {len(s)} symbols, code length is {code.n}")
    if s.phi < 1:
        raise ValueError("symbol space needs at least 2 elements (phi >= 1)")


def _uniform_symbol(phi: int, rng) -> int:
    if rng is None:
        return secrets.randbelow(1 << phi)
    return int(rng.integers(0, 1 << phi))


def _decoy_symbol(phi: int, avoid: int, rng) -> int:
    if rng is None:
        u = secrets.randbelow((1 << phi) - 1)
    else:
        u = int(rng.integers(0, (1 << phi) - 1))
    return u + (u >= avoid)


def _op_lock_symbol(value: int, phi: int, gamma: int, rng) -> LockedPoint:
    return locker._lock_raw(_symbol_keys(phi)[value], 0, 0, gamma, locker.random_bytes(locker.NONCE_BYTES, rng))


def lock_codeword(s: SymbolString, c, gamma: int, rng, exclude_genuine: bool) -> tuple[LockedPoint, ...]:
    points = []
    for si, ci in zip(s.symbols.tolist(), np.asarray(c).tolist()):
        if ci:
            value = si
        elif exclude_genuine:
            value = _decoy_symbol(s.phi, si, rng)
        else:
            value = _uniform_symbol(s.phi, rng)
        points.append(_op_lock_symbol(value, s.phi, gamma, rng))
    return tuple(points)


def unlock_codeword(s_prime: SymbolString, points, gamma: int) -> np.ndarray:
    """c'_i = opUnlock(s'_i, p_i)."""
    keys = _symbol_keys(s_prime.phi)
    return np.fromiter(
        (locker._unlock_raw(keys[v], p, gamma) is not None for v, p in zip(s_prime.symbols.tolist(), points)),
        dtype=np.uint8,
        count=len(points),
    )


def unlock_table(points, phi: int, gamma: int) -> np.ndarray:
    """Boolean (n, 2^phi) table: entry [i, v] is opUnlock(v, p_i).

    Costs n * 2^phi unlock calls once per enrollment; afterwards the codeword
    for any number of probe strings is a table lookup.
    """
    keys = _symbol_keys(phi)
    table = np.zeros((len(points), 1 << phi), dtype=bool)
    for i, p in enumerate(points):
        for v, key in enumerate(keys):
            table[i, v] = locker._unlock_raw(key, p, gamma) is not None
    return table


def eco_generate(s: SymbolString, code: BchCode, gamma: int = DEFAULT_GAMMA, rng=None):
    """ECO key generation. Returns ``(m, points)``; decoys may equal s_i."""
    _check_string(s, code)
    m = locker.random_bits(code.k, rng)
    c = encode(code, m)
    return m, lock_codeword(s, c, gamma, rng, exclude_genuine=False)


def eco_reproduce(s_prime: SymbolString, points, code: BchCode, gamma: int = DEFAULT_GAMMA) -> np.ndarray:
    """ECO key reproduction. Raises DecodeFailure."""
    _check_string(s_prime, code)
    if len(points) != code.n:
        raise ValueError(f"expected {code.n} locked points")
    m_prime, _ = decode(code, unlock_codeword(s_prime, points, gamma))
    return m_prime


def ieco_generate(
    s: SymbolString,
    code: BchCode,
    gamma: int = DEFAULT_GAMMA,
    rng=None,
    key_bits: int | None = None,
    meta: PipelineMeta | None = None,
) -> tuple[np.ndarray, HelperData]:
    """IECO key generation. Returns ``(kappa, helper)``.

    ``m`` and the decoys never leave this function.
    """
    _check_string(s, code)
    kappa = locker.random_bits(code.k if key_bits is None else key_bits, rng)
    m = locker.random_bits(code.k, rng)
    key_locker = locker.d_lock(m, kappa, gamma, rng)
    c = encode(code, m)
    points = lock_codeword(s, c, gamma, rng, exclude_genuine=True)
    extra = {}
    if meta is not None:
        extra = dict(rp_seed=meta.rp_seed, N=meta.N, K=meta.K, reliable_indices=tuple(meta.reliable_indices))
    helper = HelperData(points=points, key_locker=key_locker, n=code.n, k=code.k, phi=s.phi, gamma=gamma, **extra)
    return kappa, helper


def ieco_reproduce(s_prime: SymbolString, helper: HelperData, code: BchCode | None = None) -> np.ndarray | None:
    """IECO key reproduction. Decode failure and locker rejection both give None."""
    if helper.version != HELPER_VERSION:
        raise ValueError(f"unsupported helper version {helper.version}")
    code = code or helper.code()
    if s_prime.phi != helper.phi:
        raise ValueError("symbol size does not match helper data")
    _check_string(s_prime, code)
    try:
        m_prime, _ = decode(code, unlock_codeword(s_prime, helper.points, helper.gamma))
    except DecodeFailure:
        return None
    return locker.d_unlock(m_prime, helper.key_locker, helper.gamma)


@dataclass
class FastVerifier:
    """Batch reproduction against one helper record via its unlock table."""

    helper: HelperData
    code: BchCode
    table: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, helper: HelperData, code: BchCode | None = None) -> "FastVerifier":
        code = code or helper.code()
        return cls(helper, code, unlock_table(helper.points, helper.phi, helper.gamma))

    def codewords(self, symbols) -> np.ndarray:
        S = np.asarray(symbols, dtype=np.int64)
        return self.table[np.arange(self.code.n)[None, :], S].astype(np.uint8)

    def reproduce_many(self, symbols) -> list[np.ndarray | None]:
        msgs, _, ok = decode_batch(self.code, self.codewords(symbols))
        out: list[np.ndarray | None] = [None] * len(ok)
        for i in np.flatnonzero(ok):
            out[i] = locker.d_unlock(msgs[i], self.helper.key_locker, self.helper.gamma)
        return out
