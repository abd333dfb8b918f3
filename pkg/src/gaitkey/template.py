"""Revocable string forming: random projection, mean binarization,
reliable-bit selection and grouping into symbols."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_N = 896  # default embedding dimension


@dataclass(frozen=True)
class SymbolString:
    symbols: np.ndarray  # integer symbol values, first bit of a group is the MSB
    phi: int

    def __post_init__(self):
        if self.phi < 1:
            raise ValueError("symbol size phi must be >= 1")
        arr = np.asarray(self.symbols, dtype=np.int64)
        if arr.ndim != 1:
            raise ValueError("symbols must be one-dimensional")
        if arr.size and (arr.min() < 0 or arr.max() >= 1 << self.phi):
            raise ValueError(f"symbol values must lie in [0, 2^{self.phi})")
        object.__setattr__(self, "symbols", arr)

    def __len__(self) -> int:
        return self.symbols.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SymbolString):
            return NotImplemented
        return self.phi == other.phi and np.array_equal(self.symbols, other.symbols)

    def to_bits(self) -> np.ndarray:
        shifts = np.arange(self.phi - 1, -1, -1)
        return ((self.symbols[:, None] >> shifts) & 1).astype(np.uint8).ravel()


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    seed: int
    N: int
    K: int
    entries: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ReliableString:
    bits: np.ndarray
    indices: np.ndarray
    reliabilities: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class PipelineMeta:
    """Public metadata needed to re-derive a string at reproduction time."""

    rp_seed: int
    N: int
    K: int
    reliable_indices: tuple[int, ...]


def gaussian_from_seed(seed: int, count: int) -> np.ndarray:
    """Standard normals from Philox4x64 raw output and Box-Muller.

    Only the counter-based raw stream is taken from numpy, whose values are
    fixed by the Philox definition; the transform is done here so matrices
    regenerate identically from a stored seed.
    """
    if not 0 <= seed < 1 << 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    pairs = (count + 1) // 2
    raw = np.random.Philox(key=seed).random_raw(2 * pairs).reshape(pairs, 2)
    u1 = ((raw[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53  # (0, 1]
    u2 = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * 2.0**-53  # [0, 1)
    radius = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(theta)
    out[1::2] = radius * np.sin(theta)
    return out[:count]


def make_projection(seed: int, N: int = DEFAULT_N) -> ProjectionMatrix:
    if N < 2:
        raise ValueError("N must be >= 2")
    K = N - 1
    entries = gaussian_from_seed(seed, N * K).reshape(N, K) / np.sqrt(N)
    entries.flags.writeable = False
    return ProjectionMatrix(seed=seed, N=N, K=K, entries=entries)


def project(f, R: ProjectionMatrix) -> np.ndarray:
    """Project one template (N,) or a stack (M, N) to K dimensions."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape[-1] != R.N:
        raise ValueError(f"template dimension {f.shape[-1]} != projection input {R.N}")
    return f @ R.entries


def binarize_mean(projected) -> tuple[np.ndarray, np.ndarray]:
    P = np.asarray(projected, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] < 2:
        raise ValueError("need at least M = 2 projected templates")
    mean = P.mean(axis=0)
    bits = (mean >= 0).astype(np.uint8)
    reliabilities = -P.var(axis=0, ddof=1)
    return bits, reliabilities


def select_reliable(bits, reliabilities, count: int) -> ReliableString:
    bits = np.asarray(bits, dtype=np.uint8)
    rel = np.asarray(reliabilities, dtype=np.float64)
    if count > rel.size:
        raise ValueError(f"cannot select {count} bits from {rel.size}")
    # stable sort keeps lower indices first among equal reliabilities
    order = np.argsort(-rel, kind="stable")[:count]
    idx = np.sort(order)
    return ReliableString(bits=bits[idx], indices=idx, reliabilities=rel[idx])


def apply_indices(bits_full, indices) -> np.ndarray:
    bits_full = np.asarray(bits_full)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (np.any(np.diff(idx) <= 0)):
        raise ValueError("indices must be strictly increasing")
    if idx.size and (idx[0] < 0 or idx[-1] >= bits_full.shape[-1]):
        raise IndexError("reliable index out of range")
    return bits_full[..., idx]


def form_symbols(omega, phi: int) -> SymbolString:
    bits = np.asarray(getattr(omega, "bits", omega), dtype=np.int64)
    if phi < 1 or bits.size % phi:
        raise ValueError(f"bit string of length {bits.size} is not divisible by phi={phi}")
    weights = 1 << np.arange(phi - 1, -1, -1)
    return SymbolString(bits.reshape(-1, phi) @ weights, phi)


def symbols_from_bits_batch(bits, phi: int) -> np.ndarray:
    """(B, phi*n) bit array to (B, n) symbol values."""
    bits = np.asarray(bits, dtype=np.int64)
    weights = 1 << np.arange(phi - 1, -1, -1)
    return bits.reshape(bits.shape[0], -1, phi) @ weights


def enroll_string(templates, seed: int, phi: int, n: int) -> tuple[SymbolString, PipelineMeta]:
    T = np.asarray(templates, dtype=np.float64)
    if T.ndim != 2 or T.shape[0] < 2:
        raise ValueError("enrollment needs at least 2 feature templates")
    R = make_projection(seed, T.shape[1])
    bits, rel = binarize_mean(project(T, R))
    omega = select_reliable(bits, rel, phi * n)
    meta = PipelineMeta(rp_seed=seed, N=R.N, K=R.K, reliable_indices=tuple(int(i) for i in omega.indices))
    return form_symbols(omega, phi), meta


def reproduce_string(templates, meta: PipelineMeta, phi: int, R: ProjectionMatrix | None = None) -> SymbolString:
    """Average the templates, project the mean, binarize at the stored indices."""
    T = np.atleast_2d(np.asarray(templates, dtype=np.float64))
    if T.shape[1] != meta.N:
        raise ValueError(f"template dimension {T.shape[1]} != enrolled N={meta.N}")
    if R is None:
        R = make_projection(meta.rp_seed, meta.N)
    projected = project(T.mean(axis=0), R)
    bits = (apply_indices(projected, meta.reliable_indices) >= 0).astype(np.uint8)
    return form_symbols(bits, phi)
