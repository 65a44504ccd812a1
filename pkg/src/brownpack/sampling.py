"""Rejection baseline sampler and greedy contact erosion.

Rejection sampling accepts a candidate only when its embedding clears an
inter-class threshold against every previously accepted sample; the cost
per acceptance grows quickly as the space fills up. Erosion goes the
other way: given an ensemble that may still contain contacts, it greedily
removes the worst offenders until the survivors are strictly
contact-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dynamics import IdentityEnsemble
from .errors import DomainError, SaturationError
from .geometry import embeddings_matrix, pairwise_distances
from .models import EmbeddingModel, ModelSpec, build_model
from .params import HyperParams
from .rng import STREAM_REJECT, stream


@dataclass
class ContactGraph:
    """Undirected graph of pairs closer than a threshold."""

    n: int
    edges: np.ndarray     # (M, 2) int64, each row a < b, lexicographically sorted
    degrees: np.ndarray   # (n,) int64

    @classmethod
    def from_distances(cls, distances: np.ndarray, threshold: float) -> "ContactGraph":
        D = np.asarray(distances, dtype=np.float64)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise DomainError(f"distance matrix must be square, got shape {D.shape}")
        n = D.shape[0]
        iu = np.triu_indices(n, k=1)
        hit = D[iu] < threshold
        edges = np.stack([iu[0][hit], iu[1][hit]], axis=1).astype(np.int64)
        degrees = np.zeros(n, dtype=np.int64)
        for a, b in edges:
            degrees[a] += 1
            degrees[b] += 1
        return cls(n=n, edges=edges, degrees=degrees)


def build_contact_graph(ensemble: IdentityEnsemble, model: EmbeddingModel | None,
                        threshold: float) -> ContactGraph:
    """Graph with an edge wherever the embedding distance is below threshold."""
    if model is None:
        model = build_model(ensemble.model_spec)
    E = model.embed_batch(ensemble.latents)
    return ContactGraph.from_distances(pairwise_distances(E), threshold)


def erode(graph: ContactGraph) -> np.ndarray:
    """Greedily remove maximum-degree nodes until no contact remains.

    Ties break toward the lowest index. Survivors are returned in
    ascending index order and form an independent set of the input graph.
    """
    alive = np.ones(graph.n, dtype=bool)
    deg = graph.degrees.copy()
    adj: list[list[int]] = [[] for _ in range(graph.n)]
    for a, b in graph.edges:
        adj[a].append(int(b))
        adj[b].append(int(a))
    while True:
        worst = -1
        worst_deg = 0
        for v in range(graph.n):
            if alive[v] and deg[v] > worst_deg:
                worst = v
                worst_deg = deg[v]
        if worst < 0:
            break
        alive[worst] = False
        for nb in adj[worst]:
            if alive[nb]:
                deg[nb] -= 1
        deg[worst] = 0
    return np.flatnonzero(alive)


def reject_sample(model: EmbeddingModel, n_target: int, ict: float, max_attempts: int,
                  seed: int, sigma_init: float = 1.0,
                  params: HyperParams | None = None,
                  w_avg=None) -> tuple[IdentityEnsemble, np.ndarray]:
    """Accept candidates whose embedding clears `ict` against all accepted ones.

    Candidate k is drawn from the stream addressed by its attempt index,
    so the accepted set is a pure function of the seed. Returns the
    ensemble and the attempt count recorded at each acceptance. Raises
    SaturationError when max_attempts draws did not reach n_target.
    """
    if n_target < 1:
        raise DomainError(f"n_target must be >= 1, got {n_target}")
    if max_attempts < n_target:
        raise DomainError(f"max_attempts={max_attempts} is below n_target={n_target}")
    spec: ModelSpec = model.spec
    accepted_w = np.empty((n_target, spec.d_w))
    accepted_e = np.empty((n_target, spec.d_e))
    attempts_at_accept = np.empty(n_target, dtype=np.int64)
    n_accepted = 0
    attempts = 0
    while n_accepted < n_target and attempts < max_attempts:
        w = sigma_init * stream(seed, STREAM_REJECT, attempts, 0).standard_normal(spec.d_w)
        attempts += 1
        e = embeddings_matrix(model.embed(w), d_e=spec.d_e)[0]
        ok = True
        if n_accepted > 0:
            d = kernels.cross_angles(e[None, :], accepted_e[:n_accepted])[0]
            ok = bool(np.all(d > ict))
        if ok:
            accepted_w[n_accepted] = w
            accepted_e[n_accepted] = e
            attempts_at_accept[n_accepted] = attempts
            n_accepted += 1
    if n_accepted < n_target:
        raise SaturationError(
            f"rejection sampling saturated: accepted {n_accepted}/{n_target} "
            f"after {attempts} attempts (ict={ict})",
            accepted=n_accepted,
            attempts=attempts,
        )
    ensemble = IdentityEnsemble(
        latents=accepted_w,
        model_spec=spec,
        params=params if params is not None else HyperParams(),
        seed=seed,
        iterations_done=0,
        w_avg=w_avg,
    )
    return ensemble, attempts_at_accept
