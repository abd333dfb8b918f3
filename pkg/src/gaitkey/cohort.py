"""Synthetic users, feature templates and bit strings.

Prototypes have Uniform(-1, 1) marginals per feature, produced through a
Gaussian copula ``2 * Phi(g) - 1``. With ``shared_weight = 0`` the latent
``g`` is i.i.d. so users are independent; a positive weight mixes in a
low-rank population component so that the inter-user Hamming distance
spreads out the way measured embeddings do, while the mean stays at 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from .template import DEFAULT_N, make_projection, select_reliable, binarize_mean, project

_OPEN = np.nextafter(1.0, 0.0)

# Reference statistics of the reliable-string Hamming distances
# (intra: half-normal scale; inter: mean and standard deviation).
DISTANCE_TARGETS = {"intra_scale": 0.0251, "inter_mean": 0.496, "inter_std": 0.0871}


@dataclass(frozen=True)
class CohortModel:
    N: int = DEFAULT_N
    num_users: int = 20
    zeta: float = 0.0
    eta: float = 0.5
    intra_sigma: float = 0.0
    seed: int = 0
    shared_weight: float = 0.0
    latent_dim: int = 8

    def __post_init__(self):
        if not 0 <= self.zeta <= 0.5:
            raise ValueError("zeta must lie in [0, 0.5]")
        if not 0 <= self.eta <= 1:
            raise ValueError("eta must lie in [0, 1]")
        if self.intra_sigma < 0:
            raise ValueError("intra_sigma must be >= 0")
        if not 0 <= self.shared_weight < 1:
            raise ValueError("shared_weight must lie in [0, 1)")


# Result of calibrate_cohort(CohortModel(num_users=40)) against DISTANCE_TARGETS;
# tests/test_cohort.py re-checks the statistics.
CALIBRATED = CohortModel(intra_sigma=0.0695, shared_weight=0.755)


@dataclass(frozen=True, eq=False)
class SyntheticUser:
    prototype: np.ndarray


@lru_cache(maxsize=8)
def _population_basis(seed: int, N: int, d: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 0xBA515])
    return rng.standard_normal((N, d)) / np.sqrt(d)


def gen_user(model: CohortModel, rng: np.random.Generator) -> SyntheticUser:
    own = rng.standard_normal(model.N)
    if model.shared_weight > 0:
        basis = _population_basis(model.seed, model.N, model.latent_dim)
        latent = rng.standard_normal(model.latent_dim)
        shared = basis @ latent
        g = np.sqrt(model.shared_weight) * shared + np.sqrt(1 - model.shared_weight) * own
    else:
        g = own
    proto = np.clip(2.0 * ndtr(g) - 1.0, -_OPEN, _OPEN)
    return SyntheticUser(prototype=proto)


def user_rngs(model: CohortModel, stream: int = 0) -> list[np.random.Generator]:
    """Independent per-user generators, split deterministically from the model seed."""
    children = np.random.SeedSequence([model.seed, stream]).spawn(model.num_users)
    return [np.random.default_rng(c) for c in children]


def build_cohort(model: CohortModel) -> list[SyntheticUser]:
    return [gen_user(model, r) for r in user_rngs(model, stream=0)]


def sample_template(user: SyntheticUser, intra_sigma: float, rng: np.random.Generator) -> np.ndarray:
    if intra_sigma < 0:
        raise ValueError("intra_sigma must be >= 0")
    if intra_sigma == 0:
        return user.prototype.copy()
    noisy = user.prototype + intra_sigma * rng.standard_normal(user.prototype.size)
    return np.clip(noisy, -_OPEN, _OPEN)


def sample_templates(user: SyntheticUser, intra_sigma: float, count: int, rng) -> np.ndarray:
    """``count`` templates stacked as (count, N)."""
    noise = intra_sigma * rng.standard_normal((count, user.prototype.size))
    return np.clip(user.prototype[None, :] + noise, -_OPEN, _OPEN)


def sample_probe_means(user: SyntheticUser, intra_sigma: float, probes: int, M: int, rng) -> np.ndarray:
    """Mean templates of ``probes`` attempts, each averaging M fresh templates."""
    noise = intra_sigma * rng.standard_normal((probes, M, user.prototype.size))
    return np.clip(user.prototype[None, None, :] + noise, -_OPEN, _OPEN).mean(axis=1)


def perturb_bits(omega, zeta: float, rng: np.random.Generator) -> np.ndarray:
    omega = np.asarray(omega, dtype=np.uint8)
    return omega ^ (rng.random(omega.shape) < zeta).astype(np.uint8)


def sample_bit_pair_intra(length: int, zeta: float, rng: np.random.Generator):
    if not 0 <= zeta <= 1:
        raise ValueError("zeta must lie in [0, 1]")
    omega = rng.integers(0, 2, length, dtype=np.uint8)
    return omega, perturb_bits(omega, zeta, rng)


def sample_bit_pair_inter(length: int, eta: float, rng: np.random.Generator):
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    omega_u = rng.integers(0, 2, length, dtype=np.uint8)
    return omega_u, perturb_bits(omega_u, 1.0 - eta, rng)


# -- calibration ---------------------------------------------------------------

def omega_distances(
    model: CohortModel,
    probes: int = 10,
    M: int = 5,
    phi: int = 2,
    n: int = 255,
    inter_pairs: int = 10,
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized Hamming distances on the reliable string.

    Each user enrolls once under its own projection seed; intra distances
    come from that user's fresh probes, inter distances from other users'
    probes binarized with the enrolled user's projection and indices.
    """
    users = build_cohort(model)
    rngs = user_rngs(model, stream=1)
    count = phi * n
    intra, inter = [], []
    for u, (user, rng) in enumerate(zip(users, rngs)):
        seed = int(rng.integers(0, 2**63))
        R = make_projection(seed, model.N)
        enroll = sample_templates(user, model.intra_sigma, M, rng)
        bits, rel = binarize_mean(project(enroll, R))
        omega = select_reliable(bits, rel, count)
        Rsel = R.entries[:, omega.indices]
        mine = sample_probe_means(user, model.intra_sigma, probes, M, rng)
        intra.extend(((mine @ Rsel >= 0) != omega.bits).mean(axis=1))
        others = [v for v in range(len(users)) if v != u]
        for v in rng.choice(others, size=min(inter_pairs, len(others)), replace=False):
            theirs = sample_probe_means(users[v], model.intra_sigma, 1, M, rng)
            inter.extend(((theirs @ Rsel >= 0) != omega.bits).mean(axis=1))
    return np.asarray(intra), np.asarray(inter)


def _bisect(fn, lo: float, hi: float, target: float, iters: int = 14) -> float:
    flo = fn(lo) - target
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fmid = fn(mid) - target
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def calibrate_cohort(model: CohortModel, targets: dict = DISTANCE_TARGETS, rounds: int = 2) -> CohortModel:
    """Scalar searches over ``shared_weight`` (inter spread) and
    ``intra_sigma`` (intra half-normal scale), alternated ``rounds`` times."""
    for _ in range(rounds):
        w = _bisect(
            lambda x: omega_distances(replace(model, shared_weight=x), probes=2)[1].std(),
            0.0,
            0.99,
            targets["inter_std"],
        )
        model = replace(model, shared_weight=w)
        s = _bisect(
            lambda x: np.sqrt(np.mean(omega_distances(replace(model, intra_sigma=x), inter_pairs=0)[0] ** 2)),
            0.0,
            1.0,
            targets["intra_scale"],
        )
        model = replace(model, intra_sigma=s)
    return model


def export_templates(path, templates) -> None:
    """Write templates as CSV, one row per template, in the format the CLI reads.

    17 significant digits so values survive the text round trip exactly.
    """
    T = np.atleast_2d(np.asarray(templates, dtype=np.float64))
    np.savetxt(path, T, delimiter=",", fmt="%.17g")
