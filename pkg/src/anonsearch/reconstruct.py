"""Result reconstruction and the anonymity / reconstructability metrics."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from anonsearch.corpus import DocSet, InvertedIndex, retrieve
from anonsearch.embed import EmbeddingStore, VocabularyError


@dataclass(frozen=True)
class MetricsRecord:
    alpha: float
    rho: float | None
    ground_truth_size: int
    reconstructed_size: int

    @property
    def log_rho(self) -> float | None:
        if self.rho is None or self.rho <= 0:
            return None
        return math.log(self.rho)


def reconstruct_results(index: InvertedIndex, related: Sequence[str], l: int = 1) -> DocSet:
    """Documents retrieved by at least ``l`` of the related terms.

    ``l = 1`` is the union of the per-term results and ``l = len(related)``
    their intersection.
    """
    if not related:
        raise ValueError("need at least one related term")
    if not 1 <= l <= len(related):
        raise ValueError(f"l must be in 1..{len(related)}, got {l}")
    counts: Counter[int] = Counter()
    for term in related:
        counts.update(index.postings.get(term, ()))
    return DocSet(tuple(sorted(doc for doc, c in counts.items() if c >= l)))


def anonymity(store: EmbeddingStore, query: str, transmitted: Sequence[str]) -> float:
    """One minus the mean cosine between the query and each transmitted term."""
    if not transmitted:
        raise ValueError("anonymity is undefined for an empty transmission")
    missing = [t for t in [query, *transmitted] if t not in store]
    if missing:
        raise VocabularyError(f"token {missing[0]!r} is not in the embedding vocabulary")
    qi = store.index_of(query)
    idx = store.indices(transmitted)
    sims = np.clip((store.unit[idx] * store.unit[qi]).sum(axis=1), -1.0, 1.0)
    # A unit vector's self dot product can miss 1.0 by an ulp.
    sims[idx == qi] = 1.0
    return 1.0 - float(sims.mean())


def reconstructability(index: InvertedIndex, query: str, reconstructed: DocSet) -> float | None:
    """Recall of the reconstruction against the query's own results.

    Returns ``None`` when the query retrieves nothing.
    """
    truth = retrieve(index, query)
    if not truth:
        return None
    return len(truth & reconstructed) / len(truth)


def evaluate(
    store: EmbeddingStore,
    index: InvertedIndex,
    query: str,
    related: Sequence[str],
    transmitted: Sequence[str],
    l: int = 1,
) -> MetricsRecord:
    recon = reconstruct_results(index, related, l)
    return MetricsRecord(
        alpha=anonymity(store, query, transmitted),
        rho=reconstructability(index, query, recon),
        ground_truth_size=len(retrieve(index, query)),
        reconstructed_size=len(recon),
    )
