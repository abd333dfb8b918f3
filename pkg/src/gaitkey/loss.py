"""Representation-learning objective: triplet distance term plus an
inner-product penalty that pushes sign patterns of different users apart.

Subgradient conventions at non-differentiable points: a zero distance
contributes a zero vector, a zero inner product has sign 0, and a loss
sitting exactly on the clamp has zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TripletBatch:
    f_u: np.ndarray
    f_u_prime: np.ndarray
    f_v: np.ndarray
    alpha: float = 1.0
    beta: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        self.f_u, self.f_u_prime, self.f_v = _as_vectors(self.f_u, self.f_u_prime, self.f_v)
        if min(self.alpha, self.beta, self.delta) < 0:
            raise ValueError("alpha, beta and delta must be non-negative")


def _as_vectors(*vs):
    arrs = [np.asarray(v, dtype=np.float64) for v in vs]
    if any(a.shape != arrs[0].shape or a.ndim != 1 for a in arrs):
        raise ValueError("feature vectors must be 1-D with equal length")
    return arrs


def triplet_loss(f_u, f_u_prime, f_v, delta: float) -> float:
    u, up, v = _as_vectors(f_u, f_u_prime, f_v)
    return max(np.linalg.norm(u - up) - np.linalg.norm(u - v) + delta, 0.0)


def randomness_penalty(f_u, f_v) -> float:
    u, v = _as_vectors(f_u, f_v)
    return abs(float(u @ v))


def _inside(batch: TripletBatch) -> float:
    u, up, v = batch.f_u, batch.f_u_prime, batch.f_v
    return (
        batch.alpha * np.linalg.norm(u - up)
        - np.linalg.norm(u - v)
        + batch.beta * abs(float(u @ v))
        + batch.delta
    )


def combined_loss(batch: TripletBatch) -> float:
    return max(_inside(batch), 0.0)


def _unit(d: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(d)
    return d / norm if norm > 0 else np.zeros_like(d)


def combined_loss_gradient(batch: TripletBatch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradient of :func:`combined_loss` w.r.t. (f_u, f_u_prime, f_v)."""
    u, up, v = batch.f_u, batch.f_u_prime, batch.f_v
    if _inside(batch) <= 0:
        z = np.zeros_like(u)
        return z, z.copy(), z.copy()
    e_pos = _unit(u - up)
    e_neg = _unit(u - v)
    sgn = np.sign(u @ v)
    g_u = batch.alpha * e_pos - e_neg + batch.beta * sgn * v
    g_up = -batch.alpha * e_pos
    g_v = e_neg + batch.beta * sgn * u
    return g_u, g_up, g_v
