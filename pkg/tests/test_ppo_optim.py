import numpy as np
import pytest

from v2gcoord.errors import DomainError
from v2gcoord.ppo.optim import Adam


def scalar_adam_reference(grads, lr, beta1=0.9, beta2=0.999, eps=1e-8, p0=0.0):
    p, m, v = p0, 0.0, 0.0
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return p


def test_matches_scalar_reference():
    rng = np.random.default_rng(0)
    for _ in range(20):
        grads = rng.normal(scale=3.0, size=15)
        p = np.array([rng.normal()])
        want = scalar_adam_reference(grads, lr=0.05, p0=float(p[0]))
        opt = Adam([p], lr=0.05)
        for g in grads:
            opt.step([p], [np.array([g])])
        assert p[0] == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_first_step_is_roughly_lr_times_sign():
    p = np.array([1.0, -2.0, 0.5])
    opt = Adam([p], lr=0.01)
    opt.step([p], [np.array([4.0, -0.3, 1e-3])])
    # bias correction makes the very first step lr * g / (|g| + eps)
    np.testing.assert_allclose(p, [1.0 - 0.01, -2.0 + 0.01, 0.5 - 0.01], rtol=1e-4)


def test_constant_gradient_step_magnitude_approaches_lr():
    # with a fixed gradient the moments converge to m=g, v=g^2, so the
    # normalized step tends to lr regardless of the gradient's scale
    for g in (7.0, -0.004):
        p = np.array([0.0])
        opt = Adam([p], lr=0.01)
        for _ in range(500):
            before = float(p[0])
            opt.step([p], [np.array([g])])
        step = abs(float(p[0]) - before)
        assert step == pytest.approx(0.01, rel=1e-4)


def test_zero_gradient_leaves_parameters_alone():
    p = np.array([3.0, -1.0])
    opt = Adam([p], lr=0.1)
    opt.step([p], [np.zeros(2)])
    np.testing.assert_array_equal(p, [3.0, -1.0])


def test_updates_each_array_independently():
    rng = np.random.default_rng(4)
    a = rng.normal(size=(3, 2))
    b = rng.normal(size=4)
    a0, b0 = a.copy(), b.copy()
    opt = Adam([a, b], lr=0.02)
    opt.step([a, b], [np.ones((3, 2)), np.zeros(4)])
    assert np.all(a != a0)
    np.testing.assert_array_equal(b, b0)


def test_state_roundtrip_continues_identically():
    rng = np.random.default_rng(1)
    p_full = np.array([0.3, -0.7])
    p_split = p_full.copy()
    opt_full = Adam([p_full], lr=0.03)
    grads = [rng.normal(size=2) for _ in range(12)]
    opt_split = Adam([p_split], lr=0.03)
    for g in grads[:6]:
        opt_full.step([p_full], [g])
        opt_split.step([p_split], [g])
    opt_resumed = Adam.from_state([p_split], opt_split.state_dict())
    for g in grads[6:]:
        opt_full.step([p_full], [g])
        opt_resumed.step([p_split], [g])
    np.testing.assert_array_equal(p_split, p_full)


def test_rejects_bad_lr_and_shapes():
    with pytest.raises(DomainError, match="learning rate"):
        Adam([np.zeros(2)], lr=0.0)
    p = np.zeros(2)
    opt = Adam([p], lr=0.1)
    with pytest.raises(DomainError, match="does not match parameter"):
        opt.step([p], [np.zeros(3)])
    with pytest.raises(DomainError, match="tracks 1 arrays"):
        opt.step([p, p], [np.zeros(2), np.zeros(2)])
    with pytest.raises(DomainError, match="optimizer state"):
        Adam.from_state([np.zeros(3)], opt.state_dict())
