import json

import pytest
from hypothesis import given, strategies as st

from anonsearch.corpus import (
    DocSet,
    IndexFormatError,
    IngestionError,
    InvertedIndex,
    build_index,
    read_corpus,
    retrieve,
    retrieve_conjunctive,
    tokenize,
)

DOCS = [
    ("d1", "The quick brown fox"),
    ("d2", "A quick-thinking dog, not a fox!"),
    ("d3", "Brown bread and butter_milk"),
    ("d4", "Café au lait, CAFÉ noir"),
]


def test_tokenize():
    assert tokenize("Quick-thinking dog's 3rd bone") == ["quick", "thinking", "dog", "s", "3rd", "bone"]
    assert tokenize("butter_milk") == ["butter", "milk"]
    assert tokenize("CAFÉ") == ["café"]
    assert tokenize("  ") == []


def test_retrieve_single_and_conjunctive():
    index = build_index(DOCS)
    assert retrieve(index, "quick").ids == (0, 1)
    assert retrieve(index, "fox").ids == (0, 1)
    assert retrieve(index, "café").ids == (3,)
    assert retrieve(index, "missing").ids == ()
    assert retrieve_conjunctive(index, ["quick", "brown"]).ids == (0,)
    assert retrieve_conjunctive(index, ["brown", "missing"]).ids == ()
    with pytest.raises(ValueError):
        retrieve_conjunctive(index, [])


def test_duplicate_id_rejected():
    with pytest.raises(IngestionError):
        build_index([("a", "x"), ("a", "y")])


def test_read_corpus(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text("\n".join(json.dumps({"id": i, "text": t}) for i, t in DOCS) + "\n\n", encoding="utf-8")
    docs = list(read_corpus(path))
    assert [d.internal_id for d in docs] == [0, 1, 2, 3]
    assert docs[3].external_id == "d4"


@pytest.mark.parametrize("line", ['{"id": "a"}', "not json", '{"id": 1, "text": "x"}'])
def test_read_corpus_errors(tmp_path, line):
    path = tmp_path / "c.jsonl"
    path.write_text(line + "\n", encoding="utf-8")
    with pytest.raises(IngestionError, match="line 1"):
        list(read_corpus(path))


def test_index_round_trip(tmp_path):
    index = build_index(DOCS)
    path = tmp_path / "idx"
    index.save(path)
    back = InvertedIndex.load(path)
    assert back.postings == index.postings
    assert back.doc_count == 4
    assert back.documents == index.documents
    assert back.serialize() == index.serialize()


def test_index_load_errors(tmp_path):
    path = tmp_path / "idx"
    path.write_text("garbage\n", encoding="utf-8")
    with pytest.raises(IndexFormatError):
        InvertedIndex.load(path)
    path.write_text("ANONIDX 1 2\nfox 0\n", encoding="utf-8")
    with pytest.raises(IndexFormatError, match="line 2"):
        InvertedIndex.load(path)


def test_docset_operations():
    a, b = DocSet.of([3, 1, 2, 2]), DocSet.of([2, 5])
    assert a.ids == (1, 2, 3)
    assert (a & b).ids == (2,) and (a | b).ids == (1, 2, 3, 5)
    assert 2 in a and 4 not in a
    assert DocSet.of([2]).issubset(a)


words = st.sampled_from(["ant", "bee", "cat", "dog", "eel", "fox"])


@given(st.lists(st.lists(words, max_size=6), min_size=1, max_size=15), st.lists(words, min_size=1, max_size=3))
def test_conjunctive_matches_scan(texts, query):
    index = build_index([(str(i), " ".join(t)) for i, t in enumerate(texts)])
    expected = tuple(i for i, t in enumerate(texts) if set(query) <= set(t))
    assert retrieve_conjunctive(index, query).ids == expected
