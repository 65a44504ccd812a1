import numpy as np
import pytest

from brownpack.errors import ConfigError, ShapeError
from brownpack.models import EmbeddingModel, ModelSpec, build_model

from oracles import bf_mlp_forward, grad_close


def test_identity_model_requires_matching_dims():
    with pytest.raises(ConfigError):
        ModelSpec("identity", d_w=4, d_e=3)


def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        ModelSpec("conv", d_w=4, d_e=4)


def test_identity_embed_roundtrip():
    m = build_model(ModelSpec("identity", 4, 4))
    np.testing.assert_array_equal(m.embed([1.0, 2.0, 3.0, 4.0]), [1.0, 2.0, 3.0, 4.0])


def test_linear_build_deterministic():
    spec = ModelSpec("linear", d_w=3, d_e=2, seed=7)
    m1, m2 = build_model(spec), build_model(spec)
    assert np.array_equal(m1.weights["matrix"], m2.weights["matrix"])
    w = np.array([0.3, -1.2, 0.5])
    assert np.array_equal(m1.embed(w), m2.embed(w))


def test_linear_zero_maps_to_zero():
    m = build_model(ModelSpec("linear", d_w=3, d_e=2, seed=1))
    np.testing.assert_array_equal(m.embed(np.zeros(3)), np.zeros(2))


def test_mlp_forward_matches_oracle():
    m = build_model(ModelSpec("mlp", d_w=8, d_e=8, seed=1, hidden=16))
    rng = np.random.default_rng(2)
    for _ in range(5):
        w = rng.standard_normal(8)
        np.testing.assert_array_equal(m.embed(w), bf_mlp_forward(m.weights, w))


def test_mlp_requires_hidden():
    with pytest.raises(ConfigError):
        ModelSpec("mlp", d_w=4, d_e=4)


def test_embed_shape_errors():
    m = build_model(ModelSpec("linear", d_w=3, d_e=2, seed=1))
    with pytest.raises(ShapeError):
        m.embed([1.0, 2.0])
    with pytest.raises(ShapeError):
        m.pullback([1.0, 2.0, 3.0], [1.0])


def test_pullback_identity():
    m = build_model(ModelSpec("identity", 3, 3))
    np.testing.assert_array_equal(m.pullback([0.0, 0.0, 0.0], [1.0, 2.0, 3.0]),
                                  [1.0, 2.0, 3.0])


def test_pullback_linear_transpose():
    spec = ModelSpec("linear", d_w=2, d_e=2, seed=0)
    m = EmbeddingModel(spec, {"matrix": np.array([[1.0, 0.0], [0.0, 2.0]])})
    np.testing.assert_array_equal(m.pullback([0.0, 0.0], [1.0, 1.0]), [1.0, 2.0])


@pytest.mark.parametrize("kind,hidden", [("identity", None), ("linear", None), ("mlp", 12)])
def test_vjp_consistency(kind, hidden):
    d = 6
    spec = ModelSpec(kind, d_w=d, d_e=d, seed=4, hidden=hidden)
    m = build_model(spec)
    rng = np.random.default_rng(9)
    h = 1e-6
    for _ in range(50):
        w = rng.standard_normal(d)
        u = rng.standard_normal(d)
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        lhs = float(np.dot(m.pullback(w, u), v))
        rhs = float(np.dot(u, (m.embed(w + h * v) - m.embed(w - h * v)) / (2 * h)))
        assert grad_close(np.array([lhs]), np.array([rhs]), tol=1e-5)


def test_mlp_pullback_matches_fd_jacobian_contraction():
    m = build_model(ModelSpec("mlp", d_w=5, d_e=7, seed=11, hidden=9))
    rng = np.random.default_rng(21)
    h = 1e-6
    for _ in range(50):
        w = rng.standard_normal(5)
        u = rng.standard_normal(7)
        numeric = np.zeros(5)
        for i in range(5):
            ei = np.zeros(5)
            ei[i] = 1.0
            numeric[i] = np.dot(u, (m.embed(w + h * ei) - m.embed(w - h * ei)) / (2 * h))
        assert grad_close(m.pullback(w, u), numeric, tol=1e-5)


def test_linearity_of_linear_kind():
    m = build_model(ModelSpec("linear", d_w=4, d_e=3, seed=5))
    rng = np.random.default_rng(6)
    for _ in range(20):
        w1, w2 = rng.standard_normal(4), rng.standard_normal(4)
        alpha, beta = rng.standard_normal(2)
        lhs = m.embed(alpha * w1 + beta * w2)
        rhs = alpha * m.embed(w1) + beta * m.embed(w2)
        scale = max(np.max(np.abs(rhs)), 1e-12)
        assert np.max(np.abs(lhs - rhs)) / scale <= 1e-12


def test_batch_matches_single_calls():
    for spec in (ModelSpec("identity", 4, 4), ModelSpec("linear", 4, 3, seed=2),
                 ModelSpec("mlp", 4, 5, seed=2, hidden=6)):
        m = build_model(spec)
        rng = np.random.default_rng(8)
        W = rng.standard_normal((6, 4))
        E = m.embed_batch(W)
        for a in range(6):
            np.testing.assert_allclose(E[a], m.embed(W[a]), rtol=1e-12, atol=1e-14)
        U = rng.standard_normal((6, spec.d_e))
        G = m.pullback_batch(W, U)
        for a in range(6):
            np.testing.assert_allclose(G[a], m.pullback(W[a], U[a]), rtol=1e-12, atol=1e-14)
