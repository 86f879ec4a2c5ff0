from __future__ import annotations

import numpy as np
import pytest

from anonsearch.corpus import build_index, read_corpus
from anonsearch.desk import DeskConfig, write_desk
from anonsearch.embed import EmbeddingStore, load_embeddings

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def tiny_store() -> EmbeddingStore:
    # Two tight groups (fruit, vehicles) plus a couple of loners.
    return EmbeddingStore.from_mapping({
        "apple": [1.0, 0.1, 0.0, 0.0],
        "pear": [0.9, 0.2, 0.0, 0.05],
        "plum": [0.95, 0.0, 0.1, 0.0],
        "cherry": [0.8, 0.15, 0.05, 0.1],
        "car": [0.0, 0.0, 1.0, 0.1],
        "truck": [0.05, 0.0, 0.9, 0.2],
        "bus": [0.0, 0.1, 0.95, 0.0],
        "train": [0.1, 0.0, 0.8, 0.3],
        "moon": [0.0, 1.0, 0.0, 0.0],
        "river": [0.0, 0.0, 0.0, 1.0],
        "stone": [-0.5, 0.3, -0.2, 0.6],
        "cloud": [0.2, 0.7, -0.3, 0.1],
    })


@pytest.fixture
def random_store():
    def make(n_terms=200, dim=8, seed=0):
        rng = np.random.default_rng(seed)
        terms = tuple(f"w{i:04d}" for i in range(n_terms))
        return EmbeddingStore(terms, rng.standard_normal((n_terms, dim)))
    return make


@pytest.fixture(scope="session")
def desk_files(tmp_path_factory):
    return write_desk(tmp_path_factory.mktemp("desk"), DeskConfig())


@pytest.fixture(scope="session")
def desk(desk_files):
    store = load_embeddings(desk_files["embeddings"])
    index = build_index(read_corpus(desk_files["corpus"]))
    queries = desk_files["queries"].read_text(encoding="utf-8").split()
    return store, index, queries


SMALL_DESK = DeskConfig(
    vocab_size=3000, dim=16, n_topics=60, n_common=100, n_docs=500,
    mean_doc_length=60, n_queries=10, seed=11,
)


@pytest.fixture(scope="session")
def small_desk_files(tmp_path_factory):
    return write_desk(tmp_path_factory.mktemp("small_desk"), SMALL_DESK)


@pytest.fixture(scope="session")
def small_desk(small_desk_files):
    store = load_embeddings(small_desk_files["embeddings"])
    index = build_index(read_corpus(small_desk_files["corpus"]))
    queries = small_desk_files["queries"].read_text(encoding="utf-8").split()
    return store, index, queries
