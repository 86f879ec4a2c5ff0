"""Seed derivation and random streams.

All randomness in the package flows through :func:`make_rng`, which builds a
PCG64 generator from a ``SeedSequence``. Gaussian draws use numpy's ziggurat
sampler (``Generator.standard_normal``), so results are reproducible within
this implementation for a given seed.
"""

from __future__ import annotations

import numpy as np

FNV_OFFSET_BASIS = 14695981039346656037
FNV_PRIME = 1099511628211
_MASK64 = (1 << 64) - 1


def fnv1a64(data: str | bytes) -> int:
    """64-bit FNV-1a hash of ``data`` (strings are UTF-8 encoded)."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV_OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def format_decimal(value: float | int) -> str:
    """Render a number for seed strings.

    Integers print plainly. Reals use the shortest round-trip form, which
    keeps a trailing ``.0`` for integral values (``1.0``, ``0.6``).
    """
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("booleans are not valid seed components")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def cell_seed(master_seed: int, query: str, sigma: float, m: int, n: int, l: int) -> int:
    key = "|".join(
        [query, format_decimal(float(sigma)), format_decimal(int(m)),
         format_decimal(int(n)), format_decimal(int(l))]
    )
    return (int(master_seed) & _MASK64) ^ fnv1a64(key)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for ``seed``, optionally split into a labelled sub-stream."""
    entropy = [int(seed) & _MASK64, *(int(s) for s in stream)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
