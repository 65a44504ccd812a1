"""Latent attribute directions and mixing-weight sampling.

A covariate direction is the unit normal of a linear separator fitted on
labeled latents; moving a latent along it varies the labeled attribute.
Directions are always stored unit-norm, with edit magnitudes carried
entirely by the mixing weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError
from .rng import STREAM_MIXING, stream


@dataclass
class CovariateBasis:
    directions: np.ndarray   # (K, D_w), unit rows
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.directions = np.ascontiguousarray(self.directions, dtype=np.float64)
        if self.directions.ndim != 2 or self.directions.shape[0] < 1:
            raise ShapeError(f"directions must be (K >= 1, D_w), got shape {self.directions.shape}")
        if not self.names:
            self.names = [f"direction_{i}" for i in range(self.directions.shape[0])]
        if len(self.names) != self.directions.shape[0]:
            raise ShapeError(f"{len(self.names)} names for {self.directions.shape[0]} directions")
        norms = np.sqrt(np.einsum("ij,ij->i", self.directions, self.directions))
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise DomainError("covariate directions must be unit-norm")

    @property
    def k(self) -> int:
        return self.directions.shape[0]


@dataclass
class LabeledLatents:
    latents: np.ndarray   # (N, D_w)
    labels: np.ndarray    # (N,) values in {-1, +1}

    def __post_init__(self):
        self.latents = np.ascontiguousarray(self.latents, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.latents.ndim != 2:
            raise ShapeError(f"latents must be (N, D_w), got shape {self.latents.shape}")
        if self.labels.shape != (self.latents.shape[0],):
            raise ShapeError("one label per latent is required")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise DomainError("labels must be -1 or +1")
        if np.all(self.labels == self.labels[0]):
            raise DomainError("both label classes must be present")


def fit_direction(data: LabeledLatents, ridge: float = 1e-6) -> np.ndarray:
    """Unit normal of a ridge least-squares separator on centered latents.

    Solves (X^T X + ridge I) v = X^T y and normalizes v. Closed-form and
    deterministic; ridge > 0 keeps the system nonsingular. Antisymmetric
    in the labels: flipping every label negates the direction exactly.
    """
    if not ridge > 0:
        raise DomainError(f"ridge must be > 0, got {ridge}")
    X = data.latents - data.latents.mean(axis=0)
    y = data.labels.astype(np.float64)
    d = X.shape[1]
    v = np.linalg.solve(X.T @ X + ridge * np.eye(d), X.T @ y)
    norm = float(np.sqrt(np.dot(v, v)))
    if norm == 0.0:
        raise DomainError("separator normal vanished; classes are not separable")
    return v / norm


def sample_mixing_weights(lambda0: float, k: int, seed: int, identity: int,
                          variation: int) -> np.ndarray:
    """K independent uniforms on [-lambda0, lambda0], addressed per variation."""
    if lambda0 < 0:
        raise DomainError(f"lambda0 must be >= 0, got {lambda0}")
    if k < 1:
        raise DomainError(f"need at least one direction, got k={k}")
    g = stream(seed, STREAM_MIXING, identity, variation)
    return g.uniform(-lambda0, lambda0, k)
