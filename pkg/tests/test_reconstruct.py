import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anonsearch.corpus import DocSet, build_index, retrieve
from anonsearch.embed import EmbeddingStore, VocabularyError
from anonsearch.reconstruct import MetricsRecord, anonymity, evaluate, reconstruct_results, reconstructability

DOCS = [
    ("a", "apple pear"),
    ("b", "apple plum fruit"),
    ("c", "pear plum cherry fruit"),
    ("d", "car bus"),
    ("e", "fruit bus"),
]


@pytest.fixture
def index():
    return build_index(DOCS)


def test_union_and_intersection(index):
    assert reconstruct_results(index, ["pear", "plum"], 1).ids == (0, 1, 2)
    assert reconstruct_results(index, ["pear", "plum"], 2).ids == (2,)
    assert reconstruct_results(index, ["pear", "fruit", "bus"], 2).ids == (2, 4)
    assert reconstruct_results(index, ["zzz"], 1).ids == ()


def test_reconstruct_validates_l(index):
    with pytest.raises(ValueError):
        reconstruct_results(index, ["pear"], 2)
    with pytest.raises(ValueError):
        reconstruct_results(index, [], 1)


def test_reconstructability(index):
    # D(fruit) = {1, 2, 4}
    assert reconstructability(index, "fruit", DocSet.of([1, 2, 4])) == 1.0
    assert reconstructability(index, "fruit", DocSet.of([0, 2])) == pytest.approx(1 / 3)
    assert reconstructability(index, "fruit", DocSet()) == 0.0
    assert reconstructability(index, "zzz", DocSet.of([0])) is None


def test_anonymity_values(tiny_store):
    assert anonymity(tiny_store, "apple", ["apple"]) == 0.0
    u = tiny_store.vector("apple")
    sims = [np.dot(u, tiny_store.vector(t)) / np.linalg.norm(u) / np.linalg.norm(tiny_store.vector(t))
            for t in ("car", "moon", "stone")]
    assert anonymity(tiny_store, "apple", ["car", "moon", "stone"]) == pytest.approx(1 - np.mean(sims), abs=1e-12)
    opposite = EmbeddingStore.from_mapping({"x": [1.0, 0.0], "y": [-2.0, 0.0]})
    assert anonymity(opposite, "x", ["y"]) == 2.0
    with pytest.raises(ValueError):
        anonymity(tiny_store, "apple", [])
    with pytest.raises(VocabularyError):
        anonymity(tiny_store, "apple", ["nope"])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_anonymity_self_is_exactly_zero(seed):
    rng = np.random.default_rng(seed)
    store = EmbeddingStore(("q", "r"), rng.standard_normal((2, 7)) * rng.uniform(0.01, 100))
    assert anonymity(store, "q", ["q"]) == 0.0
    assert 0.0 <= anonymity(store, "q", ["r", "q"]) <= 2.0


def test_evaluate(tiny_store):
    index = build_index([("1", "apple pear"), ("2", "apple"), ("3", "pear plum"), ("4", "apple plum")])
    rec = evaluate(tiny_store, index, "apple", ["pear", "plum"], ["pear", "plum", "car"], l=1)
    assert rec.rho == pytest.approx(2 / 3)
    assert rec.log_rho == pytest.approx(math.log(2 / 3))
    assert rec.ground_truth_size == 3 and rec.reconstructed_size == 3
    assert rec.alpha == anonymity(tiny_store, "apple", ["pear", "plum", "car"])


def test_log_rho_undefined_cases():
    assert MetricsRecord(0.1, None, 0, 0).log_rho is None
    assert MetricsRecord(0.1, 0.0, 3, 0).log_rho is None
    assert MetricsRecord(0.1, 1.0, 3, 3).log_rho == 0.0


words = st.sampled_from([f"w{i}" for i in range(8)])


@settings(max_examples=80, deadline=None)
@given(
    st.lists(st.lists(words, max_size=5), min_size=1, max_size=12),
    st.lists(words, min_size=1, max_size=6, unique=True),
)
def test_reconstruction_matches_counting_oracle(texts, related):
    index = build_index([(str(i), " ".join(t)) for i, t in enumerate(texts)])
    for l in range(1, len(related) + 1):
        expected = tuple(i for i, t in enumerate(texts) if sum(w in set(t) for w in related) >= l)
        assert reconstruct_results(index, related, l).ids == expected
    union = set()
    for w in related:
        union |= set(retrieve(index, w).ids)
    assert set(reconstruct_results(index, related, 1).ids) == union
