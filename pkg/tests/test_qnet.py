import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pedcross.qnet import PARAM_NAMES, Adam, QNet, SGD, dumps_weights, loads_weights, q_forward


def _loss(net, obs, weights):
    return float(np.sum(net.forward(obs) * weights))


def finite_difference_grad(net, obs, weights, h=1e-5):
    g = np.zeros_like(net.theta)
    for i in range(net.theta.size):
        orig = net.theta[i]
        net.theta[i] = orig + h
        up = _loss(net, obs, weights)
        net.theta[i] = orig - h
        down = _loss(net, obs, weights)
        net.theta[i] = orig
        g[i] = (up - down) / (2 * h)
    return g


def max_relative_error(a, b):
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)
    return float(np.max(np.abs(a - b) / denom))


def test_zero_network_outputs_zero():
    assert q_forward(QNet.zeros(6), np.ones(6)) == (0.0, 0.0)


def test_advantage_shift_leaves_q_unchanged():
    rng = np.random.default_rng(0)
    net = QNet.init(7, (16, 8), rng)
    obs = rng.normal(size=(5, 7))
    before = net.forward(obs)
    net.ba += 3.7
    assert net.forward(obs) == pytest.approx(before, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(-50, 50))
def test_dueling_identity_property(seed, shift):
    rng = np.random.default_rng(seed)
    net = QNet.init(4, (6, 5), rng)
    obs = rng.normal(size=(3, 4))
    q = net.forward(obs)
    net.ba += shift
    assert net.forward(obs) == pytest.approx(q, abs=1e-9)
    # and Q - mean(Q) equals the centred advantage
    _, cache = net.forward(obs, cache=True)
    h2 = cache[-1]
    a = h2 @ net.wa + net.ba
    assert q - q.mean(axis=1, keepdims=True) == pytest.approx(a - a.mean(axis=1, keepdims=True),
                                                              abs=1e-9)


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        QNet.zeros(6).forward(np.zeros(7))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(20):
        net = QNet.init(10, (8, 8), rng)
        obs = rng.normal(size=(4, 10))
        weights = rng.normal(size=(4, 2))
        q, cache = net.forward(obs, cache=True)
        analytic = net.backward(weights, cache)
        numeric = finite_difference_grad(net, obs, weights)
        worst = max(worst, max_relative_error(analytic, numeric))
    assert worst < 1e-4


def test_views_share_storage():
    net = QNet.init(3, (4, 5), np.random.default_rng(0))
    net.theta[:] = 0.0
    assert all(np.all(getattr(net, k) == 0) for k in PARAM_NAMES)
    views = net.unflatten(np.arange(net.theta.size, dtype=float))
    assert views["w1"].shape == (3, 4) and views["ba"].shape == (2,)


def test_copy_is_independent():
    net = QNet.init(3, (4, 4), np.random.default_rng(0), "BM")
    cp = net.copy()
    net.theta += 1.0
    assert not np.allclose(net.theta, cp.theta)
    cp.load_from(net)
    assert np.array_equal(net.theta, cp.theta) and cp.variant == "BM"


def test_weight_text_round_trip():
    net = QNet.init(10, (7, 5), np.random.default_rng(2), "VLM")
    text = dumps_weights(net)
    assert text.splitlines()[0] == "VLM,10,7,5"
    back = loads_weights(text)
    assert back.variant == "VLM" and np.array_equal(back.theta, net.theta)
    assert dumps_weights(back) == text


def test_weight_text_rejects_garbage():
    with pytest.raises(ValueError):
        loads_weights("BM,6\n1,2\n")
    text = dumps_weights(QNet.zeros(2, (2, 2), "BM"))
    with pytest.raises(ValueError):
        loads_weights(text + "1.0\n")


def test_sgd_and_adam_reduce_quadratic():
    rng = np.random.default_rng(3)
    for opt in (SGD(0.05), Adam(0.01)):
        net = QNet.init(3, (8, 8), rng)
        obs = rng.normal(size=(16, 3))
        target = rng.normal(size=(16, 2))
        losses = []
        for _ in range(200):
            q, cache = net.forward(obs, cache=True)
            losses.append(float(np.mean((q - target) ** 2)))
            opt.step(net, net.backward(2 * (q - target) / q.size, cache))
        assert losses[-1] < 0.5 * losses[0]
