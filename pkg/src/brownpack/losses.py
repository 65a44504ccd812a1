"""Loss terms and their analytic latent-space gradients.

Contact losses are quadratic with compact support: a pair contributes
only while its distance is strictly below the contact threshold, and the
force vanishes continuously at the boundary. Gradients follow the
frozen-partner convention: each particle differentiates the loss with
every other particle's embedding held constant, which for these pair
potentials equals the true gradient of the symmetric loss and halves the
backward cost.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, ShapeError
from .geometry import embeddings_matrix
from .params import HyperParams


@dataclass
class LossResult:
    value: float
    gradients: np.ndarray       # (N, D_w), gradient of the loss per particle
    contact_count: int = 0      # unordered pairs strictly inside the threshold

    def __add__(self, other: "LossResult") -> "LossResult":
        return LossResult(
            value=self.value + other.value,
            gradients=self.gradients + other.gradients,
            contact_count=self.contact_count + other.contact_count,
        )


@dataclass
class TrainingSetEmbeddings:
    """Constant embedding set that synthetic samples are repulsed from."""

    embeddings: np.ndarray
    labels: list | None = None

    def __post_init__(self):
        self.embeddings = embeddings_matrix(self.embeddings)
        if self.labels is not None and len(self.labels) != self.embeddings.shape[0]:
            raise ShapeError(
                f"{len(self.labels)} labels for {self.embeddings.shape[0]} embeddings"
            )

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]


def _latents_matrix(latents) -> np.ndarray:
    W = np.ascontiguousarray(latents, dtype=np.float64)
    if W.ndim != 2:
        raise ShapeError(f"latents must be an (N, D_w) array, got shape {W.shape}")
    return W


# ---------------------------------------------------------------------------
# inter-class terms
# ---------------------------------------------------------------------------

def granular_embedding_terms(latents, model, k_e, d0_e):
    """Granular repulsion plus pair statistics.

    Returns (LossResult, pair_distance_sum, n_pairs); the distance sum is
    reused by the integrator trace so pair angles are computed once.
    """
    W = _latents_matrix(latents)
    E = embeddings_matrix(model.embed_batch(W), d_e=model.spec.d_e)
    value, grad_e, contacts, dsum = kernels.granular_embedding_forces(
        E, float(d0_e), float(k_e)
    )
    grad_w = model.pullback_batch(W, grad_e)
    n = W.shape[0]
    return LossResult(float(value), grad_w, int(contacts)), float(dsum), n * (n - 1) // 2


def granular_embedding_loss(latents, model, k_e, d0_e) -> LossResult:
    """Quadratic repulsion between embedding pairs closer than d0_e."""
    return granular_embedding_terms(latents, model, k_e, d0_e)[0]


def latent_pullback_loss(latents, w_avg, k_w) -> LossResult:
    """Quadratic attraction of every latent toward the center w_avg."""
    W = _latents_matrix(latents)
    center = np.ascontiguousarray(w_avg, dtype=np.float64)
    if center.shape != (W.shape[1],):
        raise ShapeError(f"w_avg must have shape ({W.shape[1]},), got {center.shape}")
    delta = W - center[None, :]
    value = 0.5 * k_w * float(np.sum(delta * delta))
    return LossResult(value, k_w * delta, 0)


def training_repulsion_loss(latents, model, training, k_tr, d_tr) -> LossResult:
    """Repulsion of synthetic embeddings away from a constant training set.

    Gradients flow only into the synthetic latents. An empty training set
    with k_tr > 0 is almost certainly a misconfiguration: warn and return
    a zero loss.
    """
    W = _latents_matrix(latents)
    if d_tr < 0:
        raise DomainError(f"d_tr must be >= 0, got {d_tr}")
    if training is None or training.n == 0:
        if k_tr > 0:
            warnings.warn("training repulsion enabled but the training set is empty")
        return LossResult(0.0, np.zeros_like(W), 0)
    E = embeddings_matrix(model.embed_batch(W), d_e=model.spec.d_e)
    if training.embeddings.shape[1] != E.shape[1]:
        raise ShapeError(
            f"training embeddings have length {training.embeddings.shape[1]}, "
            f"model produces {E.shape[1]}"
        )
    value, grad_e, contacts = kernels.cross_granular_forces(
        E, training.embeddings, float(d_tr), float(k_tr)
    )
    return LossResult(float(value), model.pullback_batch(W, grad_e), int(contacts))


def total_langevin_loss(latents, model, params: HyperParams, w_avg, training=None) -> LossResult:
    """Sum of granular repulsion, latent pull-back and optional training repulsion.

    The contact count reported is the granular term's.
    """
    gran = granular_embedding_loss(latents, model, params.k_e, params.d0_e)
    pull = latent_pullback_loss(latents, w_avg, params.k_w)
    total = LossResult(gran.value + pull.value, gran.gradients + pull.gradients,
                       gran.contact_count)
    if training is not None:
        rep = training_repulsion_loss(latents, model, training, params.k_tr, params.d_tr)
        total = LossResult(total.value + rep.value, total.gradients + rep.gradients,
                           total.contact_count)
    return total


# ---------------------------------------------------------------------------
# intra-class terms
# ---------------------------------------------------------------------------

def dispersion_latent_granular_terms(variations, k_w_disp, d0_w):
    """Latent-space contact loss among one identity's variations."""
    V = _latents_matrix(variations)
    value, grad, contacts, dsum = kernels.latent_granular_forces(
        V, float(d0_w), float(k_w_disp)
    )
    n = V.shape[0]
    return LossResult(float(value), grad, int(contacts)), float(dsum), n * (n - 1) // 2


def dispersion_latent_granular(variations, k_w_disp, d0_w) -> LossResult:
    return dispersion_latent_granular_terms(variations, k_w_disp, d0_w)[0]


def embedding_tether_loss(variations, reference_embedding, model, k_e_disp) -> LossResult:
    """Quadratic pull of each variation's embedding toward the reference.

    The reference embedding is a constant: no gradient flows into it.
    """
    V = _latents_matrix(variations)
    ref = np.ascontiguousarray(reference_embedding, dtype=np.float64)
    if ref.shape != (model.spec.d_e,):
        raise ShapeError(f"reference embedding must have shape ({model.spec.d_e},), got {ref.shape}")
    if kernels.vec_norm(ref) == 0.0:
        raise DomainError("reference embedding has zero norm")
    E = embeddings_matrix(model.embed_batch(V), d_e=model.spec.d_e)
    d, dgrad = kernels.angles_to_ref(E, ref)
    value = 0.5 * k_e_disp * float(np.sum(d * d))
    grad_e = (k_e_disp * d)[:, None] * dgrad
    return LossResult(value, model.pullback_batch(V, grad_e), 0)


def total_dispersion_loss(variations, reference_embedding, model,
                          params: HyperParams, w_avg) -> LossResult:
    """Latent granular + embedding tether + latent pull-back toward w_avg."""
    gran = dispersion_latent_granular(variations, params.k_w_disp, params.d0_w)
    teth = embedding_tether_loss(variations, reference_embedding, model, params.k_e_disp)
    pull = latent_pullback_loss(variations, w_avg, params.k_w_tilde)
    return LossResult(
        gran.value + teth.value + pull.value,
        gran.gradients + teth.gradients + pull.gradients,
        gran.contact_count,
    )
