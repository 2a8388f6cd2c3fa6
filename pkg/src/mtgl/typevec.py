"""Helpers for type vectors: nonnegative integer vectors indexed by type."""

from __future__ import annotations

import itertools
from collections.abc import Iterator, Sequence

import numpy as np

TypeVector = tuple[int, ...]


def as_typevec(k) -> TypeVector:
    if isinstance(k, (int, np.integer)):
        k = (k,)
    out = tuple(int(x) for x in k)
    if any(x < 0 for x in out):
        raise ValueError(f"type vector has a negative entry: {out}")
    return out


def require_nonzero(k: TypeVector) -> TypeVector:
    if sum(k) < 1:
        raise ValueError("the zero type vector is not a component configuration")
    return k


def expand(k: Sequence[int]) -> list[int]:
    """Multiset expansion: (2, 1) -> [0, 0, 1]."""
    return [s for s, ks in enumerate(k) for _ in range(ks)]


def compositions(m: int, d: int) -> Iterator[TypeVector]:
    """All k in N^d with |k| = m, in lexicographic order."""
    if d == 1:
        yield (m,)
        return
    for first in range(m + 1):
        for rest in compositions(m - first, d - 1):
            yield (first,) + rest


def shell(m: int, d: int, upper: Sequence[int] | None = None) -> list[TypeVector]:
    ks = compositions(m, d)
    if upper is None:
        return list(ks)
    return [k for k in ks if all(a <= b for a, b in zip(k, upper))]


def box(upper: Sequence[int]) -> Iterator[TypeVector]:
    """All k with 0 <= k <= upper, lexicographic (sub-vectors come first)."""
    return itertools.product(*(range(u + 1) for u in upper))


def parse_typevec(text: str) -> TypeVector:
    return as_typevec(int(x) for x in text.split(","))


def format_typevec(k: Sequence[int]) -> str:
    return ",".join(str(int(x)) for x in k)
