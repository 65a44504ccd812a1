"""Angular metric on the embedding space and its analytic gradient.

The distance between two embeddings is the angle between them:
arccos of their cosine similarity, with the cosine clamped away from
+-1 by EPS_COS before arccos. The clamp bounds the otherwise divergent
arccos derivative; inside the clamp band the gradient is defined to be
exactly zero. All arithmetic is 64-bit.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import DomainError, ShapeError


def _as_vector(x, name: str) -> np.ndarray:
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"{name} must be a 1-D vector, got shape {v.shape}")
    if not np.isfinite(v).all():
        raise DomainError(f"{name} contains non-finite components")
    return v


def _check_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    va = _as_vector(a, "a")
    vb = _as_vector(b, "b")
    if va.shape != vb.shape:
        raise ShapeError(f"vector lengths differ: {va.shape[0]} vs {vb.shape[0]}")
    if kernels.vec_norm(va) == 0.0:
        raise DomainError("first vector has zero norm")
    if kernels.vec_norm(vb) == 0.0:
        raise DomainError("second vector has zero norm")
    return va, vb


def angular_distance(a, b) -> float:
    """Angle between two nonzero vectors, in [0, pi]."""
    va, vb = _check_pair(a, b)
    return float(kernels.angle(va, vb))


def angular_distance_grad(a, b) -> np.ndarray:
    """Gradient of angular_distance with respect to the first argument.

    Always orthogonal to `a`; zero when the cosine sits at the clamp
    bound (parallel or antiparallel inputs).
    """
    va, vb = _check_pair(a, b)
    _, g = kernels.angle_grad(va, vb)
    return g


def embeddings_matrix(embeddings, d_e: int | None = None) -> np.ndarray:
    """Stack embeddings into an (N, D_e) float64 matrix and validate it."""
    E = np.ascontiguousarray(embeddings, dtype=np.float64)
    if E.ndim == 1:
        E = E[None, :]
    if E.ndim != 2:
        raise ShapeError(f"expected a list of vectors, got shape {E.shape}")
    if d_e is not None and E.shape[1] != d_e:
        raise ShapeError(f"embedding length {E.shape[1]} does not match d_e={d_e}")
    if not np.isfinite(E).all():
        raise DomainError("embeddings contain non-finite components")
    norms_sq = np.einsum("ij,ij->i", E, E)
    zero = np.flatnonzero(norms_sq == 0.0)
    if zero.size:
        raise DomainError(f"embedding {int(zero[0])} has zero norm")
    return E


def pairwise_distances(embeddings) -> np.ndarray:
    """Symmetric matrix of angular distances with an exactly zero diagonal.

    Entry (a, b) is bit-identical to angular_distance(e_a, e_b): the
    matrix kernel reuses the scalar primitives pairwise.
    """
    E = embeddings_matrix(embeddings)
    return kernels.pairwise_angles(E)


def cross_distances(embeddings_a, embeddings_b) -> np.ndarray:
    """Angular distances between two embedding sets, shape (N_a, N_b)."""
    A = embeddings_matrix(embeddings_a)
    B = embeddings_matrix(embeddings_b)
    if A.shape[1] != B.shape[1]:
        raise ShapeError(f"embedding lengths differ: {A.shape[1]} vs {B.shape[1]}")
    return kernels.cross_angles(A, B)


def latent_identity_distance(w_a, w_b, model) -> float:
    """Identity-aware latent metric: angle between the two embeddings."""
    return angular_distance(model.embed(w_a), model.embed(w_b))
