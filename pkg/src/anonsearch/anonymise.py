"""Query decomposition into noisy related terms and distractor terms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from anonsearch.embed import (
    EmbeddingStore,
    NoiseSpec,
    VocabularyError,
    nearest_neighbors,
    perturb,
)
from anonsearch.seeding import make_rng

DEFAULT_N_RELATED = 10
DEFAULT_POOL_SIZE = 2000
DEFAULT_REMOVAL_FRACTION = 0.10


class DecompositionError(RuntimeError):
    pass


@dataclass(frozen=True)
class DecomposeParams:
    n_related: int = DEFAULT_N_RELATED
    m_distractors: int = 0
    sigma: float = 0.0
    pool_size: int = DEFAULT_POOL_SIZE
    removal_fraction: float = DEFAULT_REMOVAL_FRACTION
    seed: int = 0

    def __post_init__(self):
        if self.n_related < 1:
            raise ValueError("n_related must be positive")
        if self.m_distractors < 0:
            raise ValueError("m_distractors must be non-negative")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValueError("sigma must be a finite non-negative real")
        if self.pool_size < 1:
            raise ValueError("pool_size must be positive")
        if self.pool_size < self.m_distractors:
            raise ValueError("pool_size must be at least m_distractors")
        if not 0 < self.removal_fraction < 1:
            raise ValueError("removal_fraction must lie strictly between 0 and 1")


@dataclass(frozen=True)
class DecomposedQuery:
    original: str
    related: tuple[str, ...]
    distractors: tuple[str, ...]
    transmission_order: tuple[str, ...]

    def __post_init__(self):
        rel, dis = set(self.related), set(self.distractors)
        if len(rel) != len(self.related) or len(dis) != len(self.distractors):
            raise ValueError("related and distractor lists must be duplicate-free")
        if self.original in rel or self.original in dis:
            raise ValueError("the original query may not be transmitted")
        if rel & dis:
            raise ValueError("related and distractor terms must be disjoint")
        if sorted(self.transmission_order) != sorted(self.related + self.distractors):
            raise ValueError("transmission order must be a permutation of the transmitted terms")

    def to_json(self, seed: int | None = None) -> dict:
        out = {
            "query": self.original,
            "related": list(self.related),
            "distractors": list(self.distractors),
            "order": list(self.transmission_order),
        }
        if seed is not None:
            out["seed"] = seed
        return out


@dataclass
class SplitStep:
    """One hyperplane iteration of the distractor search."""

    normal: np.ndarray
    plus: tuple[str, ...]
    minus: tuple[str, ...]
    kept_side: str
    purged: tuple[str, ...]
    remainder: tuple[str, ...]

    @property
    def removed(self) -> tuple[str, ...]:
        dropped = self.minus if self.kept_side == "+" else self.plus
        return dropped + self.purged


@dataclass
class DistractorTrace:
    pool: tuple[str, ...] = ()
    steps: list[SplitStep] = field(default_factory=list)
    backfilled: tuple[str, ...] = ()


def related_terms(
    store: EmbeddingStore,
    query: str,
    n: int,
    noise: NoiseSpec,
    rng: np.random.Generator | None = None,
) -> list[str]:
    """Top-``n`` neighbours of the query embedding after Gaussian perturbation."""
    store.index_of(query)
    if len(store) < n + 1:
        raise DecompositionError(f"vocabulary of {len(store)} terms cannot supply {n} related terms")
    if rng is None:
        rng = make_rng(noise.seed)
    noisy = perturb(store.vector(query), noise, rng)
    return [t for t, _ in nearest_neighbors(store, noisy, n, exclude={query})]


def _purge_count(fraction: float, size: int) -> int:
    # Exact decimal arithmetic: 0.1 * 30 must give 3, not 3.0000000000000004.
    return max(1, math.ceil(Fraction(repr(float(fraction))) * size))


def select_distractors(
    store: EmbeddingStore,
    query: str,
    m: int,
    params: DecomposeParams,
    forbidden: Iterable[str] = (),
    rng: np.random.Generator | None = None,
) -> tuple[list[str], DistractorTrace]:
    """Distractor search returning the hyperplane/purge trace alongside the result.

    Each iteration draws a random hyperplane through the query point, keeps the
    larger side, and drops the most query-similar fraction of it, until at most
    ``m`` candidates remain.
    """
    a = store.index_of(query)
    trace = DistractorTrace()
    if m < 0:
        raise ValueError("m must be non-negative")
    if m == 0:
        return [], trace
    if params.pool_size < m:
        raise ValueError("pool_size must be at least m")
    if rng is None:
        rng = make_rng(params.seed)

    blocked = {a} | {store.index_of(t) for t in forbidden if t in store}
    candidates = np.array([i for i in range(len(store)) if i not in blocked], dtype=np.int64)
    if len(candidates) < m:
        raise DecompositionError(f"only {len(candidates)} eligible candidates for {m} distractors")
    pool = rng.choice(candidates, size=min(params.pool_size, len(candidates)), replace=False)
    trace.pool = tuple(store.terms[i] for i in pool)

    va = store.vectors[a]
    sim = store.similarities(va)
    lex = store.lex_rank
    cap = math.ceil(10 * math.log2(max(params.pool_size, 2)))
    removal_log: list[np.ndarray] = []
    current = pool
    while len(current) > m:
        if len(trace.steps) >= cap:
            raise DecompositionError(f"distractor search exceeded {cap} iterations")
        h = rng.standard_normal(store.dim)
        h /= math.sqrt(float(np.dot(h, h)))
        side = ((store.vectors[current] - va) * h).sum(axis=1)
        plus, minus = current[side >= 0], current[side < 0]
        if len(plus) != len(minus):
            keep_plus = len(plus) > len(minus)
        else:
            keep_plus = lex[plus].min() < lex[minus].min()
        kept, dropped = (plus, minus) if keep_plus else (minus, plus)
        r = _purge_count(params.removal_fraction, len(kept))
        by_similarity = kept[np.lexsort((lex[kept], -sim[kept]))]
        purged = by_similarity[:r]
        purged_set = set(purged.tolist())
        remainder = np.array([i for i in kept if i not in purged_set], dtype=np.int64)
        trace.steps.append(
            SplitStep(
                normal=h,
                plus=tuple(store.terms[i] for i in plus),
                minus=tuple(store.terms[i] for i in minus),
                kept_side="+" if keep_plus else "-",
                purged=tuple(store.terms[i] for i in purged),
                remainder=tuple(store.terms[i] for i in remainder),
            )
        )
        removal_log.append(np.concatenate([dropped, purged]))
        current = remainder

    if len(current) < m:
        fill: list[int] = []
        for removed in reversed(removal_log):
            ordered = removed[np.lexsort((lex[removed], sim[removed]))]
            fill.extend(ordered[: m - len(current) - len(fill)].tolist())
            if len(current) + len(fill) == m:
                break
        if len(current) + len(fill) < m:
            raise DecompositionError("candidate pool exhausted with nothing left to backfill")
        trace.backfilled = tuple(store.terms[i] for i in fill)
        current = np.concatenate([current, np.array(fill, dtype=np.int64)])

    final = current[np.lexsort((lex[current], sim[current]))]
    return [store.terms[i] for i in final], trace


def distractor_terms(
    store: EmbeddingStore,
    query: str,
    m: int,
    params: DecomposeParams,
    forbidden: Iterable[str] = (),
    rng: np.random.Generator | None = None,
) -> list[str]:
    """``m`` distractors, least query-similar first."""
    return select_distractors(store, query, m, params, forbidden, rng)[0]


def decompose(
    store: EmbeddingStore,
    query: str,
    params: DecomposeParams,
    rng: np.random.Generator | None = None,
) -> DecomposedQuery:
    """Decompose ``query`` into related terms, distractors and a shuffled send order.

    One random stream drives, in order: the noise vector, the candidate pool
    and hyperplanes, and the final shuffle.
    """
    if query not in store:
        raise VocabularyError(f"token {query!r} is not in the embedding vocabulary")
    if rng is None:
        rng = make_rng(params.seed)
    related = related_terms(
        store, query, params.n_related, NoiseSpec(params.sigma, params.seed), rng
    )
    distractors = distractor_terms(
        store, query, params.m_distractors, params, set(related) | {query}, rng
    )
    sent = related + distractors
    order = [sent[i] for i in rng.permutation(len(sent))]
    return DecomposedQuery(query, tuple(related), tuple(distractors), tuple(order))
