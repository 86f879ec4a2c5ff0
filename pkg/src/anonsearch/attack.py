"""Clustering attacks against decomposed queries.

The attacker clusters the terms it receives with k-means on L2-normalised
embeddings, picks the most coherent cluster and guesses the vocabulary term
closest to its centroid. The conservative variant guesses one term per
centroid and scores a hit if any of them is the query.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from anonsearch.embed import DomainError, EmbeddingStore, rank_by_similarity
from anonsearch.seeding import make_rng


@dataclass(frozen=True)
class AttackParams:
    k: int = 1
    max_iterations: int = 100
    tolerance: float = 1e-6
    seed: int = 0
    conservative: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class AttackOutcome:
    guesses: tuple[str, ...]
    hit: bool
    chosen_cluster_coherence: float
    per_cluster_coherence: tuple[float, ...]
    mode: str = "standard"


@dataclass
class KMeansResult:
    terms: tuple[str, ...]
    labels: np.ndarray
    centroids: np.ndarray
    objective_history: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def k(self) -> int:
        return len(self.centroids)

    @property
    def clusters(self) -> list[list[str]]:
        return [[t for t, lab in zip(self.terms, self.labels) if lab == j] for j in range(self.k)]


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - C[None, :, :]
    return (diff * diff).sum(axis=2)


def _objective(X: np.ndarray, labels: np.ndarray, C: np.ndarray) -> float:
    diff = X - C[labels]
    return float((diff * diff).sum())


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(X, X[chosen]).min(axis=1)
    while len(chosen) < k:
        total = float(d2.sum())
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(rest))
        chosen.append(nxt)
        d2 = np.minimum(d2, _sq_dists(X, X[[nxt]])[:, 0])
    return X[chosen].copy()


def _repair_empty(X: np.ndarray, labels: np.ndarray, C: np.ndarray) -> np.ndarray:
    labels = labels.copy()
    k = len(C)
    for j in range(k):
        if np.any(labels == j):
            continue
        sizes = np.bincount(labels, minlength=k)
        dist = ((X - C[labels]) ** 2).sum(axis=1)
        dist[sizes[labels] < 2] = -np.inf
        # argmax takes the first maximum, keeping repairs deterministic.
        labels[int(np.argmax(dist))] = j
    return labels


def kmeans_cluster(
    store: EmbeddingStore,
    terms: Sequence[str],
    params: AttackParams,
    rng: np.random.Generator | None = None,
) -> KMeansResult:
    """Spherical k-means: Euclidean k-means on unit-normalised term vectors."""
    terms = tuple(terms)
    if not terms:
        raise ValueError("nothing to cluster")
    if params.k > len(terms):
        raise ValueError(f"k={params.k} exceeds the {len(terms)} received terms")
    if rng is None:
        rng = make_rng(params.seed)
    X = store.unit[store.indices(terms)]
    C = _kmeanspp(X, params.k, rng)
    result = KMeansResult(terms, np.zeros(len(terms), dtype=np.int64), C)
    for _ in range(params.max_iterations):
        labels = np.argmin(_sq_dists(X, C), axis=1)
        labels = _repair_empty(X, labels, C)
        new_C = np.vstack([X[labels == j].mean(axis=0) for j in range(params.k)])
        result.objective_history.append(_objective(X, labels, new_C))
        shift = float(np.sqrt(((new_C - C) ** 2).sum(axis=1)).max())
        C = new_C
        result.labels, result.centroids = labels, C
        if shift < params.tolerance:
            result.converged = True
            break
    return result


def coherence(store: EmbeddingStore, cluster: Sequence[str]) -> float:
    """Mean pairwise cosine similarity over distinct pairs of the cluster."""
    cluster = list(cluster)
    if len(cluster) < 2:
        raise DomainError("coherence needs at least two terms")
    U = store.unit[store.indices(cluster)]
    sims = [float(np.clip((U[i] * U[j]).sum(), -1.0, 1.0)) for i, j in combinations(range(len(U)), 2)]
    return math.fsum(sims) / len(sims)


def _nearest_term(store: EmbeddingStore, centroid: np.ndarray) -> str:
    return store.terms[rank_by_similarity(store, store.similarities(centroid), 1)[0]]


def _outcomes(
    store: EmbeddingStore, km: KMeansResult, true_query: str | None
) -> tuple[AttackOutcome, AttackOutcome]:
    clusters = km.clusters
    scores = tuple(coherence(store, c) if len(c) >= 2 else -math.inf for c in clusters)
    smallest = [min(c) for c in clusters]
    chosen = min(range(km.k), key=lambda j: (-scores[j], smallest[j]))
    per_centroid = tuple(_nearest_term(store, c) for c in km.centroids)

    def outcome(guesses: tuple[str, ...], mode: str) -> AttackOutcome:
        hit = true_query is not None and true_query.lower() in guesses
        return AttackOutcome(guesses, hit, scores[chosen], scores, mode)

    return outcome((per_centroid[chosen],), "standard"), outcome(per_centroid, "conservative")


def attack_both(
    store: EmbeddingStore,
    received: Sequence[str],
    params: AttackParams,
    rng: np.random.Generator | None = None,
    true_query: str | None = None,
) -> tuple[AttackOutcome, AttackOutcome, KMeansResult]:
    """Standard and conservative outcomes from a single clustering."""
    if not received:
        raise ValueError("received term list is empty")
    km = kmeans_cluster(store, received, params, rng)
    standard, conservative = _outcomes(store, km, true_query)
    return standard, conservative, km


def attack_guess(
    store: EmbeddingStore,
    received: Sequence[str],
    params: AttackParams,
    rng: np.random.Generator | None = None,
    true_query: str | None = None,
) -> AttackOutcome:
    """Run one attack; ``true_query`` only scores the result, the attacker never sees it."""
    standard, conservative, _ = attack_both(store, received, params, rng, true_query)
    return conservative if params.conservative else standard


def hit_rate(outcomes: Sequence[AttackOutcome]) -> float:
    if not outcomes:
        raise ValueError("hit rate of an empty outcome list is undefined")
    return sum(o.hit for o in outcomes) / len(outcomes)
