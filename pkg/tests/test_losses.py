import math

import numpy as np
import pytest

from brownpack.geometry import angular_distance, pairwise_distances
from brownpack.losses import (
    TrainingSetEmbeddings,
    dispersion_latent_granular,
    embedding_tether_loss,
    granular_embedding_loss,
    latent_pullback_loss,
    total_dispersion_loss,
    total_langevin_loss,
    training_repulsion_loss,
)
from brownpack.models import ModelSpec, build_model
from brownpack.params import HyperParams

from oracles import (
    bf_granular_value,
    bf_latent_granular_value,
    bf_pullback_value,
    bf_tether_value,
    bf_training_value,
    fd_gradient,
    grad_close,
)

IDENT4 = build_model(ModelSpec("identity", 4, 4))


def pair_at_angle(theta):
    """Two 4-d latents whose identity-model embeddings subtend angle theta."""
    return np.array([
        [1.0, 0.0, 0.0, 0.0],
        [math.cos(theta), math.sin(theta), 0.0, 0.0],
    ])


def margin_ok(distances, d0, margin=1e-3):
    return bool(np.all(np.abs(np.asarray(distances) - d0) > margin))


def threshold_between(distances, margin=1e-3):
    """A contact threshold clear of every sample distance by > margin."""
    s = np.sort(np.asarray(distances, dtype=float))
    gaps = np.diff(s)
    best = int(np.argmax(gaps))
    d0 = 0.5 * (s[best] + s[best + 1])
    assert gaps[best] > 2 * margin, "degenerate instance: distances too clustered"
    return float(d0)


# ---------------------------------------------------------------------------
# granular embedding repulsion
# ---------------------------------------------------------------------------

def test_granular_two_body_value():
    res = granular_embedding_loss(pair_at_angle(1.0), IDENT4, k_e=1.0, d0_e=1.4)
    assert res.value == pytest.approx(0.5 * 0.4 ** 2, rel=1e-9)
    assert res.contact_count == 1


def test_granular_no_contacts_is_zero():
    res = granular_embedding_loss(pair_at_angle(1.5), IDENT4, k_e=1.0, d0_e=1.4)
    assert res.value == 0.0
    assert res.contact_count == 0
    assert np.all(res.gradients == 0.0)


def test_granular_boundary_is_strict():
    res = granular_embedding_loss(pair_at_angle(1.4), IDENT4, k_e=1.0, d0_e=1.4)
    assert res.value == 0.0
    assert np.all(res.gradients == 0.0)


def test_granular_three_body_oracle_and_fd():
    rng = np.random.default_rng(31)
    model = build_model(ModelSpec("linear", d_w=6, d_e=5, seed=8))
    W = rng.standard_normal((3, 6))
    E = model.embed_batch(W)
    dists = pairwise_distances(E)[np.triu_indices(3, k=1)]
    d0 = float(np.max(dists)) + 0.2   # all three pairs in contact
    assert margin_ok(dists, d0)
    res = granular_embedding_loss(W, model, k_e=1.3, d0_e=d0)
    expected, contacts = bf_granular_value(E, d0, 1.3)
    assert res.value == pytest.approx(expected, rel=1e-12)
    assert res.contact_count == contacts == 3
    numeric = fd_gradient(
        lambda X: granular_embedding_loss(X, model, k_e=1.3, d0_e=d0).value, W)
    assert grad_close(res.gradients, numeric, tol=1e-5)


def test_granular_equal_norm_forces_balance():
    # Equal-magnitude tangential forces for an equal-norm pair; each
    # particle's gradient equals the frozen-partner objective's gradient.
    W = 2.0 * pair_at_angle(0.9)
    res = granular_embedding_loss(W, IDENT4, k_e=1.0, d0_e=1.4)
    f0, f1 = np.linalg.norm(res.gradients[0]), np.linalg.norm(res.gradients[1])
    assert abs(f0 - f1) / f0 <= 1e-10
    numeric = fd_gradient(
        lambda X: granular_embedding_loss(X, IDENT4, k_e=1.0, d0_e=1.4).value, W)
    assert grad_close(res.gradients, numeric, tol=1e-5)


# ---------------------------------------------------------------------------
# latent pull-back
# ---------------------------------------------------------------------------

def test_pullback_at_center_is_zero():
    W = np.tile([1.0, -2.0], (4, 1))
    res = latent_pullback_loss(W, np.array([1.0, -2.0]), k_w=0.1)
    assert res.value == 0.0
    assert np.all(res.gradients == 0.0)


def test_pullback_single_latent_arithmetic():
    res = latent_pullback_loss(np.array([[3.0, 4.0]]), np.zeros(2), k_w=0.1)
    assert res.value == pytest.approx(1.25, rel=1e-12)
    np.testing.assert_allclose(res.gradients, [[0.3, 0.4]], rtol=1e-12)
    assert res.contact_count == 0


def test_pullback_summation_oracle():
    rng = np.random.default_rng(17)
    W = rng.standard_normal((10, 5))
    center = rng.standard_normal(5)
    res = latent_pullback_loss(W, center, k_w=0.7)
    assert res.value == pytest.approx(bf_pullback_value(W, center, 0.7), rel=1e-12)


# ---------------------------------------------------------------------------
# dispersion latent granular
# ---------------------------------------------------------------------------

def test_latent_granular_coincident_guard():
    V = np.tile([0.5, -0.5, 2.0], (4, 1))
    res = dispersion_latent_granular(V, k_w_disp=2.0, d0_w=12.0)
    assert res.value == pytest.approx(0.5 * 2.0 * 6 * 12.0 ** 2, rel=1e-12)
    assert np.all(res.gradients == 0.0)
    assert res.contact_count == 6


def test_latent_granular_out_of_range():
    V = np.array([[0.0, 0.0], [13.0, 0.0]])
    res = dispersion_latent_granular(V, k_w_disp=1.0, d0_w=12.0)
    assert res.value == 0.0


def test_latent_granular_oracle_and_fd():
    rng = np.random.default_rng(23)
    V = 4.0 * rng.standard_normal((4, 6))
    d0 = 12.0
    dists = [np.linalg.norm(V[a] - V[b]) for a in range(4) for b in range(a + 1, 4)]
    assert margin_ok(dists, d0)
    res = dispersion_latent_granular(V, k_w_disp=1.0, d0_w=d0)
    expected, contacts = bf_latent_granular_value(V, d0, 1.0)
    assert res.value == pytest.approx(expected, rel=1e-12)
    assert res.contact_count == contacts
    numeric = fd_gradient(
        lambda X: dispersion_latent_granular(X, k_w_disp=1.0, d0_w=d0).value, V)
    assert grad_close(res.gradients, numeric, tol=1e-5)


def test_latent_granular_newton_third_law():
    V = np.array([[0.0, 0.0, 0.0], [3.0, 1.0, -2.0]])
    res = dispersion_latent_granular(V, k_w_disp=1.5, d0_w=12.0)
    np.testing.assert_allclose(res.gradients[0], -res.gradients[1], rtol=1e-10)


def test_latent_granular_translation_equivariance():
    rng = np.random.default_rng(29)
    V = 3.0 * rng.standard_normal((5, 4))
    shift = rng.standard_normal(4)
    r1 = dispersion_latent_granular(V, 1.0, 12.0)
    r2 = dispersion_latent_granular(V + shift, 1.0, 12.0)
    assert abs(r1.value - r2.value) <= 1e-12 * max(1.0, abs(r1.value))
    np.testing.assert_allclose(r1.gradients, r2.gradients, rtol=0, atol=1e-10)


# ---------------------------------------------------------------------------
# embedding tether
# ---------------------------------------------------------------------------

def test_tether_parallel_is_zero():
    res = embedding_tether_loss(np.array([[2.0, 0.0, 0.0, 0.0]]),
                                np.array([1.0, 0.0, 0.0, 0.0]), IDENT4, k_e_disp=1.0)
    assert res.value <= 0.5 * (4.5e-4) ** 2
    assert np.all(res.gradients == 0.0)


def test_tether_orthogonal_arithmetic():
    ident2 = build_model(ModelSpec("identity", 2, 2))
    res = embedding_tether_loss(np.array([[0.0, 1.0]]), np.array([1.0, 0.0]),
                                ident2, k_e_disp=1.0)
    assert res.value == pytest.approx((math.pi / 2) ** 2 / 2, rel=1e-9)


def test_tether_oracle_and_fd():
    rng = np.random.default_rng(37)
    model = build_model(ModelSpec("linear", d_w=5, d_e=4, seed=2))
    V = rng.standard_normal((4, 5))
    ref = model.embed(rng.standard_normal(5))
    res = embedding_tether_loss(V, ref, model, k_e_disp=0.8)
    expected = bf_tether_value(model.embed_batch(V), ref, 0.8)
    assert res.value == pytest.approx(expected, rel=1e-12)
    numeric = fd_gradient(
        lambda X: embedding_tether_loss(X, ref, model, k_e_disp=0.8).value, V)
    assert grad_close(res.gradients, numeric, tol=1e-5)


# ---------------------------------------------------------------------------
# training-set repulsion
# ---------------------------------------------------------------------------

def test_training_no_contacts():
    training = TrainingSetEmbeddings(np.array([[0.0, 1.0, 0.0, 0.0]]))
    W = np.array([[1.0, 0.0, 0.0, 0.0]])   # distance pi/2 > 0.8
    res = training_repulsion_loss(W, IDENT4, training, k_tr=1.0, d_tr=0.8)
    assert res.value == 0.0


def test_training_single_pair_arithmetic():
    training = TrainingSetEmbeddings(pair_at_angle(0.5)[1:])
    W = pair_at_angle(0.5)[:1]
    res = training_repulsion_loss(W, IDENT4, training, k_tr=1.0, d_tr=0.8)
    assert res.value == pytest.approx(0.5 * 0.3 ** 2, rel=1e-9)
    assert res.contact_count == 1


def test_training_empty_set_warns_and_is_zero():
    with pytest.warns(UserWarning):
        res = training_repulsion_loss(np.ones((2, 4)), IDENT4, None, k_tr=1.0, d_tr=0.8)
    assert res.value == 0.0


def test_training_oracle_and_fd():
    rng = np.random.default_rng(41)
    model = build_model(ModelSpec("linear", d_w=6, d_e=4, seed=12))
    W = rng.standard_normal((3, 6))
    T = rng.standard_normal((5, 4))
    training = TrainingSetEmbeddings(T)
    cross = [angular_distance(e, t) for e in model.embed_batch(W) for t in T]
    d_tr = threshold_between(cross)
    assert margin_ok(cross, d_tr)
    res = training_repulsion_loss(W, model, training, k_tr=1.1, d_tr=d_tr)
    expected, contacts = bf_training_value(model.embed_batch(W), T, d_tr, 1.1)
    assert res.value == pytest.approx(expected, rel=1e-12)
    assert res.contact_count == contacts > 0
    numeric = fd_gradient(
        lambda X: training_repulsion_loss(X, model, training, k_tr=1.1, d_tr=d_tr).value, W)
    assert grad_close(res.gradients, numeric, tol=1e-5)


# ---------------------------------------------------------------------------
# totals
# ---------------------------------------------------------------------------

def test_total_langevin_reduces_to_granular():
    params = HyperParams(k_w=0.0)
    W = pair_at_angle(1.0)
    total = total_langevin_loss(W, IDENT4, params, np.zeros(4))
    gran = granular_embedding_loss(W, IDENT4, params.k_e, params.d0_e)
    assert total.value == gran.value
    np.testing.assert_array_equal(total.gradients, gran.gradients)


def test_total_langevin_reduces_to_pullback():
    params = HyperParams(k_e=0.0)
    W = pair_at_angle(1.5)   # no contacts either way
    total = total_langevin_loss(W, IDENT4, params, np.zeros(4))
    pull = latent_pullback_loss(W, np.zeros(4), params.k_w)
    assert total.value == pull.value
    np.testing.assert_array_equal(total.gradients, pull.gradients)


def test_total_langevin_additivity():
    rng = np.random.default_rng(43)
    model = build_model(ModelSpec("linear", d_w=5, d_e=5, seed=3))
    W = rng.standard_normal((4, 5))
    training = TrainingSetEmbeddings(rng.standard_normal((6, 5)))
    params = HyperParams(d0_e=1.6, d_tr=1.2)
    w_avg = rng.standard_normal(5)
    total = total_langevin_loss(W, model, params, w_avg, training)
    parts = (granular_embedding_loss(W, model, params.k_e, params.d0_e),
             latent_pullback_loss(W, w_avg, params.k_w),
             training_repulsion_loss(W, model, training, params.k_tr, params.d_tr))
    assert total.value == pytest.approx(sum(p.value for p in parts), rel=1e-12)
    np.testing.assert_allclose(total.gradients, sum(p.gradients for p in parts),
                               rtol=1e-12, atol=0)
    assert total.contact_count == parts[0].contact_count


def test_total_dispersion_zero_when_all_coefficients_zero():
    params = HyperParams(k_w_disp=0.0, k_e_disp=0.0, k_w_tilde=0.0)
    V = np.random.default_rng(4).standard_normal((3, 4))
    res = total_dispersion_loss(V, np.array([1.0, 0.0, 0.0, 0.0]), IDENT4,
                                params, np.zeros(4))
    assert res.value == 0.0
    assert np.all(res.gradients == 0.0)


def test_total_dispersion_tether_only():
    params = HyperParams(k_w_disp=0.0, k_w_tilde=0.0, k_e_disp=1.0)
    rng = np.random.default_rng(44)
    V = rng.standard_normal((3, 4))
    ref = np.array([1.0, 1.0, 0.0, 0.0])
    total = total_dispersion_loss(V, ref, IDENT4, params, np.zeros(4))
    teth = embedding_tether_loss(V, ref, IDENT4, params.k_e_disp)
    assert total.value == teth.value
    np.testing.assert_array_equal(total.gradients, teth.gradients)


def test_total_dispersion_additivity():
    rng = np.random.default_rng(45)
    model = build_model(ModelSpec("linear", d_w=4, d_e=4, seed=6))
    V = 3.0 * rng.standard_normal((4, 4))
    ref = model.embed(rng.standard_normal(4))
    params = HyperParams(d0_w=8.0)
    w_avg = rng.standard_normal(4)
    total = total_dispersion_loss(V, ref, model, params, w_avg)
    parts = (dispersion_latent_granular(V, params.k_w_disp, params.d0_w),
             embedding_tether_loss(V, ref, model, params.k_e_disp),
             latent_pullback_loss(V, w_avg, params.k_w_tilde))
    assert total.value == pytest.approx(sum(p.value for p in parts), rel=1e-12)
    np.testing.assert_allclose(total.gradients, sum(p.gradients for p in parts),
                               rtol=1e-12, atol=0)


# ---------------------------------------------------------------------------
# cross-cutting invariants
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(6))
def test_all_losses_nonnegative(seed):
    rng = np.random.default_rng(seed)
    model = build_model(ModelSpec("mlp", d_w=5, d_e=5, seed=seed, hidden=8))
    W = rng.standard_normal((4, 5))
    params = HyperParams(d_tr=0.9)
    training = TrainingSetEmbeddings(rng.standard_normal((3, 5)))
    assert total_langevin_loss(W, model, params, np.zeros(5), training).value >= 0.0
    ref = model.embed(rng.standard_normal(5))
    assert total_dispersion_loss(3 * W, ref, model, params, np.zeros(5)).value >= 0.0


@pytest.mark.parametrize("kind,hidden", [("linear", None), ("mlp", 10)])
def test_fd_agreement_all_losses(kind, hidden):
    """Seeded N <= 8, D_w <= 16 gradient check for every loss term."""
    rng = np.random.default_rng(101)
    model = build_model(ModelSpec(kind, d_w=16, d_e=12, seed=77, hidden=hidden))
    W = rng.standard_normal((8, 16))
    E = model.embed_batch(W)
    pair_d = pairwise_distances(E)[np.triu_indices(8, k=1)]
    d0 = threshold_between(pair_d)
    assert margin_ok(pair_d, d0)
    checks = [
        (lambda X: granular_embedding_loss(X, model, 1.0, d0),
         lambda X: granular_embedding_loss(X, model, 1.0, d0).value),
        (lambda X: latent_pullback_loss(X, np.zeros(16), 0.3),
         lambda X: latent_pullback_loss(X, np.zeros(16), 0.3).value),
    ]
    for result_fn, value_fn in checks:
        assert grad_close(result_fn(W).gradients, fd_gradient(value_fn, W), tol=1e-5)

    V = 2.0 * rng.standard_normal((6, 16))
    d0w = threshold_between([np.linalg.norm(V[a] - V[b])
                             for a in range(6) for b in range(a + 1, 6)])
    res = dispersion_latent_granular(V, 1.0, d0w)
    assert grad_close(res.gradients,
                      fd_gradient(lambda X: dispersion_latent_granular(X, 1.0, d0w).value, V),
                      tol=1e-5)

    ref = model.embed(rng.standard_normal(16))
    res = embedding_tether_loss(V, ref, model, 1.0)
    assert grad_close(res.gradients,
                      fd_gradient(lambda X: embedding_tether_loss(X, ref, model, 1.0).value, V),
                      tol=1e-5)

    T = rng.standard_normal((7, 12))
    training = TrainingSetEmbeddings(T)
    cross = [angular_distance(e, t) for e in E for t in T]
    d_tr = threshold_between(cross)
    assert margin_ok(cross, d_tr)
    res = training_repulsion_loss(W, model, training, 1.0, d_tr)
    assert grad_close(
        res.gradients,
        fd_gradient(lambda X: training_repulsion_loss(X, model, training, 1.0, d_tr).value, W),
        tol=1e-5)
