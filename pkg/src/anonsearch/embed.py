"""Pretrained word vectors: loading, cosine similarity, noise and exact k-NN."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from anonsearch.seeding import make_rng

logger = logging.getLogger(__name__)


class EmbeddingParseError(ValueError):
    """Raised for a malformed word-vector file."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DomainError(ValueError):
    """Raised when a similarity is undefined (zero vectors, bad clusters)."""


class VocabularyError(KeyError):
    """Raised when a token is not in the embedding vocabulary."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "token not in vocabulary"


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0 or not math.isfinite(self.sigma):
            raise ValueError(f"sigma must be a finite non-negative real, got {self.sigma}")


@dataclass(frozen=True, eq=False)
class EmbeddingStore:
    """Immutable vocabulary -> vector mapping with precomputed norms.

    ``unit`` holds the L2-normalised rows and ``lex_rank`` the position of
    each term in lexicographic order; both are derived at construction.
    """

    terms: tuple[str, ...]
    vectors: np.ndarray
    skipped_zero_norm: int = 0
    norms: np.ndarray = field(init=False, repr=False)
    unit: np.ndarray = field(init=False, repr=False)
    lex_rank: np.ndarray = field(init=False, repr=False)
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(self.terms):
            raise ValueError("vectors must be a (len(terms), dim) matrix")
        if vectors.shape[1] < 1:
            raise ValueError("dim must be positive")
        index = {t: i for i, t in enumerate(self.terms)}
        if len(index) != len(self.terms):
            raise ValueError("terms must be unique")
        norms = np.sqrt((vectors * vectors).sum(axis=1))
        if np.any(norms <= 0) or not np.all(np.isfinite(norms)):
            raise ValueError("every vector needs a finite, strictly positive norm")
        unit = vectors / norms[:, None]
        lex_rank = np.empty(len(self.terms), dtype=np.int64)
        lex_rank[np.array(sorted(range(len(self.terms)), key=self.terms.__getitem__), dtype=np.int64)] = (
            np.arange(len(self.terms))
        )
        for arr in (vectors, norms, unit, lex_rank):
            arr.setflags(write=False)
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "norms", norms)
        object.__setattr__(self, "unit", unit)
        object.__setattr__(self, "lex_rank", lex_rank)
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_mapping(cls, mapping: dict[str, Sequence[float]]) -> "EmbeddingStore":
        terms = tuple(mapping)
        return cls(terms, np.array([mapping[t] for t in terms], dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: object) -> bool:
        return term in self._index

    def index_of(self, term: str) -> int:
        try:
            return self._index[term]
        except KeyError:
            raise VocabularyError(f"token {term!r} is not in the embedding vocabulary") from None

    def indices(self, terms: Iterable[str]) -> np.ndarray:
        return np.array([self.index_of(t) for t in terms], dtype=np.int64)

    def vector(self, term: str) -> np.ndarray:
        return self.vectors[self.index_of(term)]

    def norm(self, term: str) -> float:
        return float(self.norms[self.index_of(term)])

    def similarities(self, v: np.ndarray) -> np.ndarray:
        """Cosine similarity of ``v`` against every stored term."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.dim,):
            raise ValueError(f"query vector must have length {self.dim}")
        nv = math.sqrt(float(np.dot(v, v)))
        if nv == 0:
            raise DomainError("cosine similarity is undefined for the zero vector")
        # Row-wise reduction rather than a BLAS matvec: each score depends only
        # on its own row, so identical vectors always tie exactly.
        sims = (self.unit * (v / nv)).sum(axis=1)
        return np.clip(sims, -1.0, 1.0)


def load_embeddings(path: str | Path, expected_dim: int | None = None) -> EmbeddingStore:
    """Read a whitespace-separated text word-vector file (GloVe layout).

    Tokens are lowercased and the first occurrence of a token wins. Rows with
    a zero norm are dropped with a warning.
    """
    dim = expected_dim
    terms: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    zero_norm = 0
    with open(path, encoding="utf-8", newline=None) as fh:
        for line_number, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            token, fields = parts[0].lower(), parts[1:]
            if dim is None:
                if not fields:
                    raise EmbeddingParseError("token has no vector components", line_number)
                dim = len(fields)
            if len(fields) != dim:
                raise EmbeddingParseError(
                    f"expected {dim} components for {token!r}, found {len(fields)}", line_number
                )
            try:
                vec = np.array([float(x) for x in fields], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingParseError(f"non-numeric component ({exc})", line_number) from None
            if not np.all(np.isfinite(vec)):
                raise EmbeddingParseError("non-finite component", line_number)
            if token in seen:
                continue
            if not np.any(vec):
                zero_norm += 1
                continue
            seen.add(token)
            terms.append(token)
            rows.append(vec)
    if not terms:
        if zero_norm:
            raise EmbeddingParseError(f"{path}: every vector has zero norm")
        raise EmbeddingParseError(f"{path}: no word vectors found")
    if zero_norm:
        logger.warning("skipped %d zero-norm vectors in %s", zero_norm, path)
    return EmbeddingStore(tuple(terms), np.vstack(rows), skipped_zero_norm=zero_norm)


def save_embeddings(store: EmbeddingStore, path: str | Path, precision: int | None = None) -> None:
    """Write the store in the text format :func:`load_embeddings` reads."""
    fmt = repr if precision is None else (lambda x: f"{x:.{precision}f}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for term, vec in zip(store.terms, store.vectors):
            fh.write(term + " " + " ".join(fmt(float(x)) for x in vec) + "\n")


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError("vectors must have the same length")
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu == 0 or nv == 0:
        raise DomainError("cosine similarity is undefined for the zero vector")
    return min(1.0, max(-1.0, float(np.dot(u, v)) / (nu * nv)))


def perturb(v, noise: NoiseSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Return ``v + theta`` with ``theta ~ Normal(0, sigma^2 I)``.

    ``rng`` defaults to a fresh stream seeded from ``noise.seed``.
    """
    v = np.asarray(v, dtype=np.float64)
    if noise.sigma == 0:
        return v.copy()
    if rng is None:
        rng = make_rng(noise.seed)
    return v + noise.sigma * rng.standard_normal(v.shape[0])


def rank_by_similarity(store: EmbeddingStore, sims: np.ndarray, n: int) -> np.ndarray:
    """Indices of the ``n`` highest scores, ties broken by term order.

    Entries equal to ``-inf`` are treated as excluded.
    """
    available = int(np.count_nonzero(sims > -np.inf))
    if n > available:
        raise ValueError(f"requested {n} neighbours but only {available} candidates are available")
    if n <= 0:
        return np.empty(0, dtype=np.int64)
    if n < len(sims):
        # Keep everything tied with the n-th best so the tie-break stays exact.
        cutoff = np.partition(sims, len(sims) - n)[len(sims) - n]
        candidates = np.flatnonzero(sims >= cutoff)
    else:
        candidates = np.arange(len(sims))
    order = np.lexsort((store.lex_rank[candidates], -sims[candidates]))
    return candidates[order[:n]]


def nearest_neighbors(
    store: EmbeddingStore, v, n: int, exclude: Iterable[str] = ()
) -> list[tuple[str, float]]:
    """Exact top-``n`` cosine neighbours of ``v``, excluding ``exclude``.

    Results are sorted by descending similarity; equal similarities are
    ordered lexicographically by term.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    sims = store.similarities(v)
    excluded = [store._index[t] for t in exclude if t in store._index]
    if excluded:
        sims = sims.copy()
        sims[excluded] = -np.inf
    idx = rank_by_similarity(store, sims, n)
    return [(store.terms[i], float(sims[i])) for i in idx]
