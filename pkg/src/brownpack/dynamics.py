"""Stochastic integrators for inter-class packing and intra-class dispersion.

The packing integrator performs first-order updates

    w <- w - dt * grad(L) + eta0 * sqrt(dt) * zeta

with an adaptive time-step limiting each move to a fraction tau of the
current minimal latent pair distance. The dispersion integrator uses the
same update with a fixed time-step, independently per identity.

Noise is addressed by (seed, absolute iteration, particle), never by
draw order, so a run split into two resumed halves is bit-identical to
one uninterrupted run, and per-identity dispersion results do not depend
on the order identities are processed in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .constants import GRAD_NORM_FLOOR, MIN_DIST_FLOOR
from .errors import DomainError, NumericError, ShapeError
from .losses import (
    dispersion_latent_granular_terms,
    embedding_tether_loss,
    granular_embedding_terms,
    latent_pullback_loss,
    training_repulsion_loss,
)
from .models import EmbeddingModel, ModelSpec, build_model
from .params import HyperParams
from .rng import (
    STREAM_DISPERSION_NOISE,
    STREAM_INIT,
    STREAM_VARIATION_NOISE,
    draw_noise,
    stream,
)

TRACE_SERIES = (
    "mean_embedding_distance",
    "mean_latent_distance",
    "mean_granular_force",
    "mean_pullback_force",
    "contact_ratio",
    "timestep",
)


@dataclass
class TraceRecord:
    """Scalar diagnostics of one iteration, measured on the pre-update state."""

    mean_embedding_distance: float
    mean_latent_distance: float
    mean_granular_force: float
    mean_pullback_force: float
    contact_ratio: float
    timestep: float

    def as_tuple(self):
        return (
            self.mean_embedding_distance,
            self.mean_latent_distance,
            self.mean_granular_force,
            self.mean_pullback_force,
            self.contact_ratio,
            self.timestep,
        )


@dataclass
class RunTrace:
    """Per-iteration scalar series, one entry per completed iteration."""

    mean_embedding_distance: np.ndarray = field(default_factory=lambda: np.empty(0))
    mean_latent_distance: np.ndarray = field(default_factory=lambda: np.empty(0))
    mean_granular_force: np.ndarray = field(default_factory=lambda: np.empty(0))
    mean_pullback_force: np.ndarray = field(default_factory=lambda: np.empty(0))
    contact_ratio: np.ndarray = field(default_factory=lambda: np.empty(0))
    timestep: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self) -> int:
        return self.mean_embedding_distance.shape[0]

    @classmethod
    def from_records(cls, records: list[TraceRecord]) -> "RunTrace":
        cols = np.array([r.as_tuple() for r in records], dtype=np.float64)
        if cols.size == 0:
            cols = np.empty((0, len(TRACE_SERIES)))
        return cls(**{name: np.ascontiguousarray(cols[:, i])
                      for i, name in enumerate(TRACE_SERIES)})

    def to_series(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TRACE_SERIES}

    @classmethod
    def from_series(cls, series: dict[str, np.ndarray]) -> "RunTrace":
        missing = set(TRACE_SERIES) - set(series)
        if missing:
            raise ShapeError(f"trace series missing: {sorted(missing)}")
        return cls(**{name: np.ascontiguousarray(series[name], dtype=np.float64)
                      for name in TRACE_SERIES})


@dataclass
class IdentityEnsemble:
    """Latent positions of the identity particles plus run provenance."""

    latents: np.ndarray          # (N_id, D_w)
    model_spec: ModelSpec
    params: HyperParams
    seed: int
    iterations_done: int = 0
    w_avg: np.ndarray | None = None

    def __post_init__(self):
        self.latents = np.ascontiguousarray(self.latents, dtype=np.float64)
        if self.latents.ndim != 2 or self.latents.shape[0] < 1:
            raise ShapeError(f"latents must be (N >= 1, D_w), got shape {self.latents.shape}")
        if self.latents.shape[1] != self.model_spec.d_w:
            raise ShapeError(
                f"latent length {self.latents.shape[1]} does not match model d_w={self.model_spec.d_w}"
            )
        if self.w_avg is None:
            self.w_avg = np.zeros(self.model_spec.d_w)
        self.w_avg = np.ascontiguousarray(self.w_avg, dtype=np.float64)
        if self.w_avg.shape != (self.model_spec.d_w,):
            raise ShapeError(f"w_avg must have shape ({self.model_spec.d_w},), got {self.w_avg.shape}")
        if self.iterations_done < 0:
            raise ShapeError("iterations_done must be >= 0")

    @property
    def n_id(self) -> int:
        return self.latents.shape[0]


@dataclass
class VariationSet:
    """Per-identity variation latents tied to a reference ensemble."""

    variations: np.ndarray             # (N_id, N_var, D_w)
    reference_latents: np.ndarray      # (N_id, D_w)
    reference_embeddings: np.ndarray   # (N_id, D_e)
    model_spec: ModelSpec
    params: HyperParams
    seed: int
    iterations_done: int = 0
    w_avg: np.ndarray | None = None

    def __post_init__(self):
        self.variations = np.ascontiguousarray(self.variations, dtype=np.float64)
        self.reference_latents = np.ascontiguousarray(self.reference_latents, dtype=np.float64)
        self.reference_embeddings = np.ascontiguousarray(self.reference_embeddings, dtype=np.float64)
        if self.variations.ndim != 3:
            raise ShapeError(f"variations must be (N_id, N_var, D_w), got shape {self.variations.shape}")
        n_id, _, d_w = self.variations.shape
        if self.reference_latents.shape != (n_id, d_w):
            raise ShapeError("reference latents do not match the variation block")
        if self.reference_embeddings.shape != (n_id, self.model_spec.d_e):
            raise ShapeError("reference embeddings do not match the model output size")
        if self.w_avg is None:
            self.w_avg = np.zeros(d_w)
        self.w_avg = np.ascontiguousarray(self.w_avg, dtype=np.float64)
        if self.w_avg.shape != (d_w,):
            raise ShapeError(f"w_avg must have shape ({d_w},), got {self.w_avg.shape}")

    @property
    def n_id(self) -> int:
        return self.variations.shape[0]

    @property
    def n_var(self) -> int:
        return self.variations.shape[1]


# ---------------------------------------------------------------------------
# time-step
# ---------------------------------------------------------------------------

def adaptive_timestep(min_latent_pair_distance: float, max_gradient_norm: float,
                      tau: float, dt_cap: float) -> float:
    """Fraction tau of the closest latent pair distance per unit force.

    Guards: the pair distance is floored at MIN_DIST_FLOOR, a vanishing
    gradient yields dt_cap, and the result never exceeds dt_cap.
    """
    if max_gradient_norm < GRAD_NORM_FLOOR:
        return dt_cap
    dt = tau * max(min_latent_pair_distance, MIN_DIST_FLOOR) / max_gradient_norm
    return min(dt, dt_cap)


def _row_norms(G: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", G, G))


# ---------------------------------------------------------------------------
# inter-class packing
# ---------------------------------------------------------------------------

def langevin_init(n_id: int, model_spec: ModelSpec, params: HyperParams, seed: int,
                  sigma_init: float = 1.0, w_avg=None) -> IdentityEnsemble:
    """Draw n_id latents i.i.d. N(0, sigma_init^2 I), one stream per particle."""
    if n_id < 1:
        raise DomainError(f"n_id must be >= 1, got {n_id}")
    d_w = model_spec.d_w
    latents = np.empty((n_id, d_w))
    for a in range(n_id):
        latents[a] = sigma_init * stream(seed, STREAM_INIT, 0, a).standard_normal(d_w)
    return IdentityEnsemble(latents, model_spec, params, seed, 0, w_avg)


def langevin_step(ensemble: IdentityEnsemble, training=None,
                  model: EmbeddingModel | None = None) -> TraceRecord:
    """Advance the ensemble by one iteration in place; returns the trace record.

    Two-pass scheme: embeddings are computed once per iteration, then each
    particle accumulates its force against the frozen partner embeddings.
    """
    if model is None:
        model = build_model(ensemble.model_spec)
    p = ensemble.params
    W = ensemble.latents
    n = ensemble.n_id
    it = ensemble.iterations_done

    gran, de_sum, n_pairs = granular_embedding_terms(W, model, p.k_e, p.d0_e)
    pull = latent_pullback_loss(W, ensemble.w_avg, p.k_w)
    grad = gran.gradients + pull.gradients
    if training is not None:
        rep = training_repulsion_loss(W, model, training, p.k_tr, p.d_tr)
        grad = grad + rep.gradients

    if not np.isfinite(grad).all():
        bad = int(np.flatnonzero(~np.isfinite(grad).all(axis=1))[0])
        raise NumericError(f"non-finite gradient at iteration {it}, particle {bad}")

    min_dw, dw_sum = kernels.latent_min_mean(W)
    max_grad = float(np.max(_row_norms(grad)))
    dt = adaptive_timestep(min_dw, max_grad, p.tau, p.dt_cap)

    zeta = np.empty_like(W)
    for a in range(n):
        zeta[a] = draw_noise(ensemble.seed, it, a, W.shape[1])
    ensemble.latents = W - dt * grad + (p.eta0 * math.sqrt(dt)) * zeta
    ensemble.iterations_done = it + 1

    return TraceRecord(
        mean_embedding_distance=de_sum / n_pairs if n_pairs else 0.0,
        mean_latent_distance=dw_sum / n_pairs if n_pairs else 0.0,
        mean_granular_force=float(np.mean(_row_norms(gran.gradients))),
        mean_pullback_force=float(np.mean(_row_norms(pull.gradients))),
        contact_ratio=gran.contact_count / n_pairs if n_pairs else 0.0,
        timestep=dt,
    )


def run_langevin(ensemble: IdentityEnsemble, n_iter: int | None = None,
                 training=None) -> tuple[IdentityEnsemble, RunTrace]:
    """Apply langevin_step n_iter times (params.n_iter when not given).

    On failure the partial trace is attached to the raised exception as
    ``partial_trace``.
    """
    if n_iter is None:
        n_iter = ensemble.params.n_iter
    model = build_model(ensemble.model_spec)
    records: list[TraceRecord] = []
    try:
        for _ in range(n_iter):
            records.append(langevin_step(ensemble, training=training, model=model))
    except Exception as exc:
        exc.partial_trace = RunTrace.from_records(records)
        raise
    return ensemble, RunTrace.from_records(records)


# ---------------------------------------------------------------------------
# intra-class variations
# ---------------------------------------------------------------------------

def init_variations(reference: IdentityEnsemble, n_var: int, xi0: float, seed: int,
                    model: EmbeddingModel | None = None) -> VariationSet:
    """Clone each reference n_var times plus symmetry-breaking noise xi0."""
    if n_var < 1:
        raise DomainError(f"n_var must be >= 1, got {n_var}")
    if model is None:
        model = build_model(reference.model_spec)
    d_w = reference.model_spec.d_w
    variations = np.empty((reference.n_id, n_var, d_w))
    for a in range(reference.n_id):
        for alpha in range(n_var):
            v = reference.latents[a]
            if xi0 != 0.0:
                v = v + xi0 * stream(seed, STREAM_VARIATION_NOISE, a, alpha).standard_normal(d_w)
            variations[a, alpha] = v
    return VariationSet(
        variations=variations,
        reference_latents=reference.latents.copy(),
        reference_embeddings=model.embed_batch(reference.latents),
        model_spec=reference.model_spec,
        params=reference.params,
        seed=seed,
        w_avg=reference.w_avg.copy(),
    )


def disco_init(reference: IdentityEnsemble, n_var: int, xi0: float, lambda0: float,
               covariates, seed: int, model: EmbeddingModel | None = None) -> VariationSet:
    """init_variations plus a random mix of covariate directions.

    Mixing weights are uniform on [-lambda0, lambda0], drawn independently
    per (identity, variation, direction). With lambda0 = 0 the result is
    bit-identical to init_variations with the same seed.
    """
    from .covariates import sample_mixing_weights

    directions = np.ascontiguousarray(covariates.directions, dtype=np.float64)
    d_w = reference.model_spec.d_w
    if directions.ndim != 2 or directions.shape[1] != d_w:
        raise ShapeError(
            f"covariate directions must have shape (K, {d_w}), got {directions.shape}"
        )
    vs = init_variations(reference, n_var, xi0, seed, model=model)
    if lambda0 != 0.0:
        k = directions.shape[0]
        for a in range(vs.n_id):
            for alpha in range(n_var):
                lam = sample_mixing_weights(lambda0, k, seed, a, alpha)
                vs.variations[a, alpha] += lam @ directions
    return vs


def disperse_identity(variations_a: np.ndarray, reference_embedding: np.ndarray,
                      identity: int, model: EmbeddingModel, params: HyperParams,
                      w_avg: np.ndarray, seed: int, start_iteration: int,
                      n_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Run the dispersion update for one identity's variation block.

    Pure function of its arguments: identities never interact, so calling
    this per identity in any order reproduces a full run exactly.

    Returns (final variations, per-iteration stat rows). Stat row layout:
    (embed_pair_sum, latent_pair_sum, n_pairs, granular_force_sum,
    pullback_force_sum, contacts).
    """
    V = np.ascontiguousarray(variations_a, dtype=np.float64).copy()
    n_var, d_w = V.shape
    p = params
    stats = np.zeros((n_steps, 6))
    for step in range(n_steps):
        it = start_iteration + step
        gran, dw_sum, n_pairs = dispersion_latent_granular_terms(V, p.k_w_disp, p.d0_w)
        teth = embedding_tether_loss(V, reference_embedding, model, p.k_e_disp)
        pull = latent_pullback_loss(V, w_avg, p.k_w_tilde)
        grad = gran.gradients + teth.gradients + pull.gradients
        if not np.isfinite(grad).all():
            raise NumericError(
                f"non-finite dispersion gradient at iteration {it}, identity {identity}"
            )
        E = model.embed_batch(V)
        M = kernels.pairwise_angles(E)
        de_sum = float(np.sum(M[np.triu_indices(n_var, k=1)]))

        zeta = np.empty_like(V)
        for alpha in range(n_var):
            zeta[alpha] = stream(seed, STREAM_DISPERSION_NOISE, it, identity,
                                 alpha).standard_normal(d_w)
        V = V - p.dt_tilde * grad + (p.eta0_tilde * math.sqrt(p.dt_tilde)) * zeta

        stats[step] = (
            de_sum,
            dw_sum,
            n_pairs,
            float(np.sum(_row_norms(gran.gradients))),
            float(np.sum(_row_norms(pull.gradients))),
            gran.contact_count,
        )
    return V, stats


def run_dispersion(variations: VariationSet,
                   model: EmbeddingModel | None = None,
                   n_iter: int | None = None) -> tuple[VariationSet, RunTrace]:
    """Disperse every identity independently; trace pools means over identities."""
    if model is None:
        model = build_model(variations.model_spec)
    p = variations.params
    if n_iter is None:
        n_iter = p.n_iter_disp
    w_avg = variations.w_avg
    start = variations.iterations_done
    all_stats = np.zeros((variations.n_id, n_iter, 6))
    for a in range(variations.n_id):
        final, stats = disperse_identity(
            variations.variations[a], variations.reference_embeddings[a], a,
            model, p, w_avg, variations.seed, start, n_iter,
        )
        variations.variations[a] = final
        all_stats[a] = stats
    variations.iterations_done = start + n_iter

    pooled = all_stats.sum(axis=0)    # identity-ascending reduction
    n_pairs = pooled[:, 2]
    total_var = variations.n_id * variations.n_var
    records = []
    for t in range(n_iter):
        pairs = n_pairs[t]
        records.append(TraceRecord(
            mean_embedding_distance=pooled[t, 0] / pairs if pairs else 0.0,
            mean_latent_distance=pooled[t, 1] / pairs if pairs else 0.0,
            mean_granular_force=pooled[t, 3] / total_var,
            mean_pullback_force=pooled[t, 4] / total_var,
            contact_ratio=pooled[t, 5] / pairs if pairs else 0.0,
            timestep=p.dt_tilde,
        ))
    return variations, RunTrace.from_records(records)
