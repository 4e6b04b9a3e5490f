import numpy as np
import pytest

from roi_adapt.mlp import Adam, Mlp

from conftest import finite_difference, grad_rel_error


def test_forward_shapes():
    net = Mlp([3, 8, 8, 2], rng=np.random.default_rng(0))
    out = net.forward(np.zeros((5, 3)))
    assert out.shape == (5, 2)
    out1 = net.forward(np.zeros(3))
    assert out1.shape == (1, 2)


def test_rejects_bad_construction():
    with pytest.raises(ValueError):
        Mlp([3])
    with pytest.raises(ValueError):
        Mlp([3, 2], activation="sigmoid")


@pytest.mark.parametrize("activation", ["relu", "tanh"])
def test_param_gradients_match_finite_differences(activation):
    rng = np.random.default_rng(1)
    net = Mlp([3, 8, 8, 2], activation=activation, rng=rng)
    x = rng.normal(size=(6, 3))
    w = rng.normal(size=(6, 2))  # random linear readout makes a scalar loss

    def loss_at(vec):
        net.set_param_vector(vec)
        return float((net.forward(x) * w).sum())

    vec = net.param_vector()
    out, cache = net.forward_cache(x)
    grads, _ = net.backward(cache, w)
    analytic = np.concatenate([g.ravel() for g in grads])
    numeric = finite_difference(loss_at, vec)
    net.set_param_vector(vec)
    assert grad_rel_error(analytic, numeric) < 1e-6


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    net = Mlp([4, 8, 1], activation="tanh", rng=rng)
    x0 = rng.normal(size=(1, 4))

    def loss_at(xvec):
        return float(net.forward(xvec.reshape(1, 4)).sum())

    _, cache = net.forward_cache(x0)
    _, d_input = net.backward(cache, np.ones((1, 1)))
    numeric = finite_difference(loss_at, x0.ravel().copy())
    assert grad_rel_error(d_input.ravel(), numeric) < 1e-6


def test_param_vector_roundtrip():
    net = Mlp([3, 5, 2], rng=np.random.default_rng(3))
    vec = net.param_vector()
    other = Mlp([3, 5, 2], rng=np.random.default_rng(99))
    other.set_param_vector(vec)
    assert np.array_equal(other.param_vector(), vec)
    with pytest.raises(ValueError):
        other.set_param_vector(vec[:-1])


def test_copy_is_independent():
    net = Mlp([2, 4, 1], rng=np.random.default_rng(4))
    dup = net.copy()
    net.weights[0][0, 0] += 1.0
    assert dup.weights[0][0, 0] != net.weights[0][0, 0]


def test_adam_descends_quadratic():
    rng = np.random.default_rng(5)
    p = [rng.normal(size=(4,))]
    opt = Adam(p)
    for _ in range(400):
        opt.step(p, [2.0 * p[0]], lr=0.05)  # d/dp of ||p||^2
    assert np.abs(p[0]).max() < 1e-3


def test_adam_zero_gradient_keeps_params():
    p = [np.ones((3, 3))]
    opt = Adam(p)
    opt.step(p, [np.zeros((3, 3))], lr=0.1)
    assert np.array_equal(p[0], np.ones((3, 3)))
