import numpy as np
import pytest

from gaitkey.loss import (
    TripletBatch,
    combined_loss,
    combined_loss_gradient,
    randomness_penalty,
    triplet_loss,
)


def numeric_grad(batch, h=1e-6):
    grads = []
    for name in ("f_u", "f_u_prime", "f_v"):
        base = getattr(batch, name)
        g = np.zeros_like(base)
        for i in range(base.size):
            up, dn = base.copy(), base.copy()
            up[i] += h
            dn[i] -= h
            kw = dict(f_u=batch.f_u, f_u_prime=batch.f_u_prime, f_v=batch.f_v, alpha=batch.alpha, beta=batch.beta, delta=batch.delta)
            g[i] = (combined_loss(TripletBatch(**{**kw, name: up})) - combined_loss(TripletBatch(**{**kw, name: dn}))) / (2 * h)
        grads.append(g)
    return grads


def test_hand_values():
    u, up, v = np.array([0.0, 0.0]), np.array([3.0, 4.0]), np.array([1.0, 0.0])
    assert triplet_loss(u, up, v, 0.5) == pytest.approx(5 - 1 + 0.5)
    assert triplet_loss(u, v, up, 0.0) == 0.0
    assert randomness_penalty([1, -2], [3, 1]) == pytest.approx(1.0)
    b = TripletBatch([1.0, 0.0], [1.0, 1.0], [0.0, 2.0], alpha=2.0, beta=0.5, delta=0.1)
    assert combined_loss(b) == 0.0  # 2 - sqrt(5) + 0 + 0.1 < 0 is clamped
    b = TripletBatch([1.0, 0.0], [1.0, 1.0], [2.0, 1.0], alpha=2.0, beta=0.5, delta=0.1)
    assert combined_loss(b) == pytest.approx(2 * 1 - np.sqrt(2) + 0.5 * 2 + 0.1)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 30:
        d = int(rng.integers(2, 8))
        b = TripletBatch(rng.normal(size=d), rng.normal(size=d), rng.normal(size=d), alpha=rng.uniform(0.5, 2), beta=rng.uniform(0, 1), delta=rng.uniform(0, 3))
        if combined_loss(b) < 1e-3 or abs(b.f_u @ b.f_v) < 1e-3:
            continue
        for a, n in zip(combined_loss_gradient(b), numeric_grad(b)):
            assert np.allclose(a, n, rtol=1e-5, atol=1e-7)
        checked += 1


def test_clamped_region_has_zero_gradient():
    b = TripletBatch([0.0, 0.0], [0.1, 0.0], [5.0, 0.0], beta=0.0)
    assert combined_loss(b) == 0.0
    assert all(np.all(g == 0) for g in combined_loss_gradient(b))


def test_subgradient_conventions():
    b = TripletBatch([1.0, 0.0], [1.0, 0.0], [0.0, 1.0], delta=2.0)
    g_u, g_up, g_v = combined_loss_gradient(b)
    # zero positive distance contributes nothing; u.v = 0 has sign 0
    assert np.allclose(g_up, 0)
    assert np.allclose(g_u, -np.array([1.0, -1.0]) / np.sqrt(2))


def test_validation():
    with pytest.raises(ValueError):
        TripletBatch([1.0], [1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        TripletBatch([1.0], [1.0], [1.0], delta=-1)
