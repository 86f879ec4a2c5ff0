import numpy as np
import pytest
from hypothesis import given, strategies as st

from anonsearch.seeding import cell_seed, fnv1a64, format_decimal, make_rng


# Published FNV-1a 64-bit test vectors.
@pytest.mark.parametrize("data,expected", [
    ("", 0xCBF29CE484222325),
    ("a", 0xAF63DC4C8601EC8C),
    ("foobar", 0x85944171F73967E8),
])
def test_fnv1a64_reference_vectors(data, expected):
    assert fnv1a64(data) == expected
    assert fnv1a64(data.encode()) == expected


@pytest.mark.parametrize("value,text", [
    (0.0, "0.0"), (1.0, "1.0"), (0.6, "0.6"), (1.4, "1.4"), (40, "40"), (0, "0"), (1e-7, "1e-07"),
])
def test_format_decimal(value, text):
    assert format_decimal(value) == text


def test_format_decimal_rejects_bool():
    with pytest.raises(TypeError):
        format_decimal(True)


def test_cell_seed_matches_hash_of_key():
    assert cell_seed(0, "hitler", 1.0, 40, 10, 1) == fnv1a64("hitler|1.0|40|10|1")
    assert cell_seed(5, "q", 0, 0, 10, 1) == 5 ^ fnv1a64("q|0.0|0|10|1")


def test_integral_sigma_renders_as_real():
    assert cell_seed(1, "a", 1, 0, 10, 1) == cell_seed(1, "a", 1.0, 0, 10, 1)


@given(st.integers(0, 2**64 - 1), st.text(min_size=1, max_size=12))
def test_cell_seed_xor_structure(master, query):
    base = cell_seed(0, query, 0.6, 20, 10, 2)
    assert cell_seed(master, query, 0.6, 20, 10, 2) == master ^ base
    assert 0 <= cell_seed(master, query, 0.6, 20, 10, 2) < 2**64


def test_make_rng_streams_are_reproducible_and_distinct():
    a = make_rng(7, 1).standard_normal(5)
    assert np.array_equal(a, make_rng(7, 1).standard_normal(5))
    assert not np.array_equal(a, make_rng(7, 2).standard_normal(5))
    assert not np.array_equal(a, make_rng(7).standard_normal(5))
