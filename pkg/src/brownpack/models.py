"""Differentiable latent-to-embedding maps.

Three analytic model kinds stand in for whatever chain produces
embeddings from latents in a full pipeline:

* ``identity``: e = w (requires d_w == d_e)
* ``linear``:   e = A w, entries of A drawn N(0, 1/d_w)
* ``mlp``:      e = W2 tanh(W1 w + b1) + b2

Weights are a pure function of the spec seed, so a spec fully determines
the map. Models expose the forward map and its vector-Jacobian product
(`pullback`); full Jacobians are never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError, ShapeError
from .rng import STREAM_MODEL, stream

MODEL_KINDS = ("identity", "linear", "mlp")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    d_w: int
    d_e: int
    seed: int = 0
    hidden: int | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}, expected one of {MODEL_KINDS}")
        if self.d_w < 1 or self.d_e < 1:
            raise ConfigError(f"model dimensions must be positive, got d_w={self.d_w}, d_e={self.d_e}")
        if self.kind == "identity" and self.d_w != self.d_e:
            raise ConfigError(f"identity model requires d_w == d_e, got {self.d_w} != {self.d_e}")
        if self.kind == "mlp" and (self.hidden is None or self.hidden < 1):
            raise ConfigError(f"mlp model requires a positive hidden width, got {self.hidden}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "d_w": self.d_w, "d_e": self.d_e,
                "seed": self.seed, "hidden": self.hidden}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSpec":
        allowed = {"kind", "d_w", "d_e", "seed", "hidden"}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown model spec keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class EmbeddingModel:
    """Immutable map from latent space to embedding space."""

    spec: ModelSpec
    weights: dict = field(default_factory=dict)

    # -- shape helpers -------------------------------------------------

    def _latent(self, w) -> np.ndarray:
        w = np.ascontiguousarray(w, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != self.spec.d_w:
            raise ShapeError(f"latent must have shape ({self.spec.d_w},), got {w.shape}")
        return w

    def _latent_batch(self, W) -> np.ndarray:
        W = np.ascontiguousarray(W, dtype=np.float64)
        if W.ndim != 2 or W.shape[1] != self.spec.d_w:
            raise ShapeError(f"latent batch must have shape (N, {self.spec.d_w}), got {W.shape}")
        return W

    def _cotangent(self, u) -> np.ndarray:
        u = np.ascontiguousarray(u, dtype=np.float64)
        if u.ndim != 1 or u.shape[0] != self.spec.d_e:
            raise ShapeError(f"cotangent must have shape ({self.spec.d_e},), got {u.shape}")
        return u

    # -- forward -------------------------------------------------------

    def embed(self, w) -> np.ndarray:
        w = self._latent(w)
        kind = self.spec.kind
        if kind == "identity":
            e = w.copy()
        elif kind == "linear":
            e = self.weights["matrix"] @ w
        else:
            h = np.tanh(self.weights["w1"] @ w + self.weights["b1"])
            e = self.weights["w2"] @ h + self.weights["b2"]
        if not np.isfinite(e).all():
            raise NumericError("embedding overflowed to a non-finite value")
        return e

    def embed_batch(self, W) -> np.ndarray:
        W = self._latent_batch(W)
        kind = self.spec.kind
        if kind == "identity":
            E = W.copy()
        elif kind == "linear":
            E = W @ self.weights["matrix"].T
        else:
            H = np.tanh(W @ self.weights["w1"].T + self.weights["b1"])
            E = H @ self.weights["w2"].T + self.weights["b2"]
        if not np.isfinite(E).all():
            raise NumericError("embedding batch contains non-finite values")
        return E

    # -- reverse -------------------------------------------------------

    def pullback(self, w, cotangent) -> np.ndarray:
        """u^T J(w): pull an embedding-space cotangent back to latent space."""
        w = self._latent(w)
        u = self._cotangent(cotangent)
        kind = self.spec.kind
        if kind == "identity":
            return u.copy()
        if kind == "linear":
            return self.weights["matrix"].T @ u
        h = np.tanh(self.weights["w1"] @ w + self.weights["b1"])
        g_pre = (self.weights["w2"].T @ u) * (1.0 - h * h)
        return self.weights["w1"].T @ g_pre

    def pullback_batch(self, W, U) -> np.ndarray:
        W = self._latent_batch(W)
        U = np.ascontiguousarray(U, dtype=np.float64)
        if U.shape != (W.shape[0], self.spec.d_e):
            raise ShapeError(f"cotangent batch must have shape ({W.shape[0]}, {self.spec.d_e}), got {U.shape}")
        kind = self.spec.kind
        if kind == "identity":
            return U.copy()
        if kind == "linear":
            return U @ self.weights["matrix"]
        H = np.tanh(W @ self.weights["w1"].T + self.weights["b1"])
        G_pre = (U @ self.weights["w2"]) * (1.0 - H * H)
        return G_pre @ self.weights["w1"]


def build_model(spec: ModelSpec) -> EmbeddingModel:
    """Instantiate a model, drawing any weights from the spec's seed.

    Draw order is fixed (w1, b1, w2, b2 for the mlp) and each matrix uses
    scale 1/sqrt(fan_in), keeping embedding norms O(1) across widths.
    """
    if spec.kind == "identity":
        return EmbeddingModel(spec)
    g = stream(spec.seed, STREAM_MODEL)
    if spec.kind == "linear":
        matrix = g.standard_normal((spec.d_e, spec.d_w)) / np.sqrt(spec.d_w)
        return EmbeddingModel(spec, {"matrix": matrix})
    hidden = spec.hidden
    w1 = g.standard_normal((hidden, spec.d_w)) / np.sqrt(spec.d_w)
    b1 = g.standard_normal(hidden) / np.sqrt(spec.d_w)
    w2 = g.standard_normal((spec.d_e, hidden)) / np.sqrt(hidden)
    b2 = g.standard_normal(spec.d_e) / np.sqrt(hidden)
    return EmbeddingModel(spec, {"w1": w1, "b1": b1, "w2": w2, "b2": b2})
