"""Hash-based digital lockers and obfuscated point functions.

``dLock(s, v) = (nonce, Expand(nonce || key(s)) XOR (v || 0^gamma))`` with
SHA-256 in counter mode as the expandable hash. Keys are canonicalised as a
32-bit little-endian bit length followed by the bits packed LSB-first, so
``01`` and ``010`` never collide.

Bit strings at the API are 0/1 sequences (numpy uint8 arrays). Ciphertexts
are kept packed (LSB-first) as ``bytes`` plus an explicit bit length.
"""

from __future__ import annotations

import hashlib
import secrets
import struct
from dataclasses import dataclass

import numpy as np

NONCE_BYTES = 16
DEFAULT_GAMMA = 128
_HASH_BITS = 256
MAX_EXPAND_BITS = _HASH_BITS * 2**16


@dataclass(frozen=True)
class LockedPoint:
    nonce: bytes
    ciphertext: bytes
    bit_length: int

    def to_bytes(self) -> bytes:
        return self.nonce + struct.pack("<I", self.bit_length) + self.ciphertext

    @classmethod
    def from_bytes(cls, buf: bytes, offset: int = 0) -> tuple["LockedPoint", int]:
        """Parse one point at ``offset``; returns the point and the next offset."""
        end = offset + NONCE_BYTES + 4
        if len(buf) < end:
            raise ValueError("truncated locked point header")
        nonce = bytes(buf[offset : offset + NONCE_BYTES])
        (nbits,) = struct.unpack_from("<I", buf, offset + NONCE_BYTES)
        nbytes = (nbits + 7) // 8
        if len(buf) < end + nbytes:
            raise ValueError("truncated locked point ciphertext")
        ct = bytes(buf[end : end + nbytes])
        if nbits % 8 and ct[-1] >> (nbits % 8):
            raise ValueError("nonzero padding bits in locked point ciphertext")
        return cls(nonce, ct, nbits), end + nbytes


def pack_bits(bits) -> bytes:
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise ValueError("bit strings must contain only 0 and 1")
    return np.packbits(arr, bitorder="little").tobytes()


def unpack_bits(buf: bytes, length: int) -> np.ndarray:
    arr = np.unpackbits(np.frombuffer(buf, dtype=np.uint8), bitorder="little")
    return arr[:length].copy()


def canonical_key(bits) -> bytes:
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    return struct.pack("<I", arr.size) + pack_bits(arr)


def random_bytes(n: int, rng: np.random.Generator | None = None) -> bytes:
    """Draw n bytes from ``rng``, or from the OS CSPRNG when rng is None."""
    if rng is None:
        return secrets.token_bytes(n)
    return rng.bytes(n)


def random_bits(n: int, rng: np.random.Generator | None = None) -> np.ndarray:
    return unpack_bits(random_bytes((n + 7) // 8, rng), n)


def expand(seed: bytes, nbits: int) -> int:
    """Counter-mode SHA-256 output, truncated to ``nbits``, as an LSB-first int."""
    if nbits > MAX_EXPAND_BITS:
        raise ValueError(f"cannot expand to {nbits} bits")
    blocks = -(-nbits // _HASH_BITS)
    out = b"".join(
        hashlib.sha256(seed + struct.pack("<I", i)).digest() for i in range(blocks)
    )
    return int.from_bytes(out, "little") & ((1 << nbits) - 1)


def _lock_raw(key: bytes, v: int, vlen: int, gamma: int, nonce: bytes) -> LockedPoint:
    nbits = vlen + gamma
    ct = expand(nonce + key, nbits) ^ v
    return LockedPoint(nonce, ct.to_bytes((nbits + 7) // 8, "little"), nbits)


def _unlock_raw(key: bytes, point: LockedPoint, gamma: int) -> int | None:
    nbits = point.bit_length
    plain = expand(point.nonce + key, nbits) ^ int.from_bytes(point.ciphertext, "little")
    vlen = nbits - gamma
    if plain >> vlen:
        return None
    return plain


def d_lock(s, v, gamma: int = DEFAULT_GAMMA, rng: np.random.Generator | None = None) -> LockedPoint:
    """Lock plaintext bits ``v`` under key bits ``s``."""
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    v = np.asarray(v, dtype=np.uint8).ravel()
    if v.size + gamma > MAX_EXPAND_BITS:
        raise ValueError("plaintext too long for the expandable hash")
    v_int = int.from_bytes(pack_bits(v), "little") if v.size else 0
    return _lock_raw(canonical_key(s), v_int, v.size, gamma, random_bytes(NONCE_BYTES, rng))


def d_unlock(s_prime, point: LockedPoint, gamma: int = DEFAULT_GAMMA) -> np.ndarray | None:
    """Return the locked plaintext bits, or None when the key is rejected."""
    if point.bit_length < gamma:
        raise ValueError("locked point shorter than gamma")
    plain = _unlock_raw(canonical_key(s_prime), point, gamma)
    if plain is None:
        return None
    vlen = point.bit_length - gamma
    return unpack_bits(plain.to_bytes((vlen + 7) // 8, "little"), vlen)


def op_lock(s, gamma: int = DEFAULT_GAMMA, rng: np.random.Generator | None = None) -> LockedPoint:
    return d_lock(s, (), gamma, rng)


def op_unlock(s_prime, point: LockedPoint, gamma: int = DEFAULT_GAMMA) -> bool:
    if point.bit_length != gamma:
        raise ValueError("point-function ciphertext must be exactly gamma bits")
    return _unlock_raw(canonical_key(s_prime), point, gamma) is not None
