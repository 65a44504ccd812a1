"""Ensemble statistics: contact ratios, histograms, leakage, trace summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import IdentityEnsemble, RunTrace
from .errors import ConfigError, DomainError
from .geometry import cross_distances
from .models import EmbeddingModel, build_model

# Embedding-distance histograms default to 64 uniform bins over [0, pi].
DEFAULT_BINS = 64

# Plateau detection looks at the final fifth of the recorded iterations.
PLATEAU_WINDOW_FRACTION = 0.2


def _check_square(distance_matrix) -> np.ndarray:
    D = np.asarray(distance_matrix, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise DomainError(f"distance matrix must be square, got shape {D.shape}")
    if D.shape[0] < 2:
        raise DomainError("at least 2 samples are required for pair statistics")
    return D


def rho_threshold(distance_matrix, d_ict: float) -> float:
    """Fraction of unordered pairs with distance strictly below d_ict."""
    D = _check_square(distance_matrix)
    n = D.shape[0]
    upper = D[np.triu_indices(n, k=1)]
    return float(np.count_nonzero(upper < d_ict)) / upper.shape[0]


def contacts_per_identity(distance_matrix, d_ict: float) -> float:
    """Average number of contacts per identity: 2 * N_contacts / N_id."""
    D = _check_square(distance_matrix)
    n = D.shape[0]
    upper = D[np.triu_indices(n, k=1)]
    return 2.0 * float(np.count_nonzero(upper < d_ict)) / n


@dataclass
class Histogram:
    bin_edges: np.ndarray   # (n_bins + 1,) ascending
    counts: np.ndarray      # (n_bins,) int64
    underflow: int
    overflow: int

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow


def histogram(values, n_bins: int = DEFAULT_BINS, range_low: float = 0.0,
              range_high: float = float(np.pi)) -> Histogram:
    """Uniform binning, left-closed right-open, last bin right-closed.

    Samples outside [range_low, range_high] land in the under/overflow
    counters so the total is always conserved.
    """
    if n_bins < 1:
        raise ConfigError(f"n_bins must be >= 1, got {n_bins}")
    if not range_low < range_high:
        raise ConfigError(f"invalid histogram range [{range_low}, {range_high}]")
    v = np.asarray(values, dtype=np.float64).ravel()
    underflow = int(np.count_nonzero(v < range_low))
    overflow = int(np.count_nonzero(v > range_high))
    in_range = v[(v >= range_low) & (v <= range_high)]
    counts, edges = np.histogram(in_range, bins=n_bins, range=(range_low, range_high))
    return Histogram(bin_edges=edges, counts=counts.astype(np.int64),
                     underflow=underflow, overflow=overflow)


def leakage_minimum(ensemble: IdentityEnsemble, model: EmbeddingModel | None,
                    training) -> tuple[float, tuple[int, int], np.ndarray]:
    """Exact minimum synthetic-to-training embedding distance.

    Returns (minimum, (synthetic index, training index), full distance
    matrix).
    """
    if training is None or training.n == 0:
        raise DomainError("leakage check requires a nonempty training set")
    if model is None:
        model = build_model(ensemble.model_spec)
    E = model.embed_batch(ensemble.latents)
    D = cross_distances(E, training.embeddings)
    flat = int(np.argmin(D))
    pair = (flat // D.shape[1], flat % D.shape[1])
    return float(D[pair]), pair, D


def trace_summary(trace: RunTrace) -> dict:
    """Initial/final distances, plateau change over the last 20%, dt range."""
    if len(trace) == 0:
        raise DomainError("trace is empty")
    de = trace.mean_embedding_distance
    dw = trace.mean_latent_distance
    window = max(1, int(np.ceil(PLATEAU_WINDOW_FRACTION * len(trace))))
    tail = de[-window:]
    tail_scale = abs(float(np.mean(tail)))
    spread = float(np.max(tail) - np.min(tail))
    return {
        "iterations": len(trace),
        "initial_mean_embedding_distance": float(de[0]),
        "final_mean_embedding_distance": float(de[-1]),
        "total_change_embedding_distance": float(de[-1] - de[0]),
        "initial_mean_latent_distance": float(dw[0]),
        "final_mean_latent_distance": float(dw[-1]),
        "plateau_window": window,
        "plateau_relative_change": spread / tail_scale if tail_scale > 0 else spread,
        "min_timestep": float(np.min(trace.timestep)),
        "max_timestep": float(np.max(trace.timestep)),
    }
