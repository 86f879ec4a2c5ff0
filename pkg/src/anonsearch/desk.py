"""Synthetic desk-scale data: word vectors plus a topic-model corpus.

The vocabulary has three kinds of terms:

* common words whose directions sit near a shared background direction
  (function words in real embeddings behave this way),
* one frequent hub word per topic, pointing at the topic centre,
* member words scattered around their topic centre.

Documents are drawn from a log-linear discourse model: each document gets a
discourse vector ``c`` near one or two topic centres and emits words with
probability proportional to ``prior(w) * exp(kappa * <u_w, c>)``. Word
co-occurrence therefore follows embedding similarity, which is what the
anonymity/reconstructability analysis assumes.

Hubs of the most popular topics are the query set. The first hubs carry the
names of the bundled default query list so that query file works
against a desk corpus too.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from anonsearch.corpus import Document
from anonsearch.embed import EmbeddingStore, save_embeddings
from anonsearch.seeding import make_rng


@dataclass(frozen=True)
class DeskConfig:
    vocab_size: int = 50_000
    dim: int = 50
    n_topics: int = 1_000
    n_common: int = 1_000
    n_docs: int = 6_000
    mean_doc_length: int = 150
    n_queries: int = 50
    background_weight: float = 0.6
    topic_spread: float = 1.0
    common_spread: float = 0.5
    concentration: float = 14.0
    discourse_spread: float = 0.3
    secondary_topic_prob: float = 0.5
    secondary_weight: float = 0.5
    topic_zipf: float = 0.5
    hub_prior: float = 1.0
    common_prior: float = 30.0
    seed: int = 2015


def default_queries() -> list[str]:
    text = resources.files("anonsearch").joinpath("data/queries.txt").read_text(encoding="utf-8")
    return [line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")]


def _unit(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


@dataclass
class DeskData:
    store: EmbeddingStore
    documents: list[Document]
    queries: list[str]
    config: DeskConfig


def generate(config: DeskConfig = DeskConfig()) -> DeskData:
    rng = make_rng(config.seed)
    d, T = config.dim, config.n_topics
    n_members = config.vocab_size - config.n_common - T
    if n_members < T:
        raise ValueError("vocabulary too small for the requested topic count")
    if config.n_queries > T:
        raise ValueError("more queries than topics")

    background = _unit(rng.standard_normal(d))
    centres = _unit(rng.standard_normal((T, d)))
    member_topic = np.sort(rng.integers(T, size=n_members))

    common = _unit(background + config.common_spread * rng.standard_normal((config.n_common, d)) / np.sqrt(d))
    hubs = _unit(config.background_weight * background + centres)
    members = _unit(
        config.background_weight * background
        + centres[member_topic]
        + config.topic_spread * rng.standard_normal((n_members, d)) / np.sqrt(d)
    )

    # Topic popularity; queries are the hubs of the most popular topics.
    popularity = rng.permutation(np.arange(1, T + 1) ** -config.topic_zipf)
    popularity /= popularity.sum()
    by_popularity = np.argsort(-popularity, kind="stable")

    names = default_queries()
    hub_names = [f"hub{k:04d}" for k in range(T)]
    for rank, k in enumerate(by_popularity[: min(len(names), config.n_queries)]):
        hub_names[k] = names[rank]
    member_names = []
    counts: dict[int, int] = {}
    for k in member_topic:
        counts[k] = counts.get(k, 0) + 1
        member_names.append(f"t{k:03d}w{counts[k]:03d}")
    common_names = [f"gen{i:04d}" for i in range(config.n_common)]

    # Priors: common words frequent, hubs next, members Zipf within topic.
    member_prior = np.empty(n_members)
    for k in range(T):
        idx = np.flatnonzero(member_topic == k)
        member_prior[idx] = rng.permutation(1.0 / np.arange(1, len(idx) + 1) ** 0.5)
    common_prior = config.common_prior * rng.permutation(1.0 / np.arange(1, config.n_common + 1) ** 0.3)
    hub_prior = np.full(T, config.hub_prior)

    directions = np.vstack([common, hubs, members])
    prior = np.concatenate([common_prior, hub_prior, member_prior])
    terms = common_names + hub_names + member_names

    # Norms grow with log prior, roughly the range of 300-d GloVe content words.
    logp = np.log(prior)
    q = (logp - logp.min()) / (logp.max() - logp.min())
    norms = 4.0 + 2.5 * q + 0.3 * rng.standard_normal(len(prior))
    norms = np.clip(norms, 2.5, None)
    norms[: config.n_common] = 4.5 + 0.3 * rng.standard_normal(config.n_common)
    vectors = directions * norms[:, None]

    order = np.argsort(-prior, kind="stable")
    store = EmbeddingStore(tuple(terms[i] for i in order), vectors[order])

    docs = _sample_documents(config, rng, centres, popularity, directions, np.log(prior), terms)
    queries = [hub_names[k] for k in by_popularity[: config.n_queries]]
    return DeskData(store, docs, queries, config)


def _sample_documents(config, rng, centres, popularity, directions, log_prior, terms):
    T, d = centres.shape
    docs: list[Document] = []
    chunk = 200
    for start in range(0, config.n_docs, chunk):
        size = min(chunk, config.n_docs - start)
        primary = rng.choice(T, size=size, p=popularity)
        secondary = rng.choice(T, size=size, p=popularity)
        use_second = rng.random(size) < config.secondary_topic_prob
        c = centres[primary] + np.where(use_second[:, None], config.secondary_weight * centres[secondary], 0.0)
        c = _unit(c + config.discourse_spread * rng.standard_normal((size, d)) / np.sqrt(d))
        logits = log_prior[None, :] + config.concentration * (c @ directions.T)
        logits -= logits.max(axis=1, keepdims=True)
        weights = np.exp(logits)
        cdf = np.cumsum(weights, axis=1)
        lengths = np.maximum(5, rng.poisson(config.mean_doc_length, size=size))
        for row in range(size):
            draws = rng.random(lengths[row]) * cdf[row, -1]
            idx = np.minimum(np.searchsorted(cdf[row], draws, side="right"), len(terms) - 1)
            docs.append(Document(len(docs), f"doc{len(docs):05d}", " ".join(terms[i] for i in idx)))
    return docs


def write_desk(out_dir: str | Path, config: DeskConfig = DeskConfig()) -> dict[str, Path]:
    """Generate and write ``embeddings.txt``, ``corpus.jsonl``, ``queries.txt``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = generate(config)
    paths = {
        "embeddings": out / "embeddings.txt",
        "corpus": out / "corpus.jsonl",
        "queries": out / "queries.txt",
        "desk_config": out / "desk_config.json",
    }
    save_embeddings(data.store, paths["embeddings"], precision=6)
    with open(paths["corpus"], "w", encoding="utf-8", newline="\n") as fh:
        for doc in data.documents:
            fh.write(json.dumps({"id": doc.external_id, "text": doc.text}) + "\n")
    paths["queries"].write_text("\n".join(data.queries) + "\n", encoding="utf-8")
    paths["desk_config"].write_text(json.dumps(asdict(config), indent=2) + "\n", encoding="utf-8")
    return paths
