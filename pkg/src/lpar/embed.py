"""Deterministic bag-of-words text embeddings, cosine similarity, centroids.

The recipe is dependency-free feature hashing: lowercase, strip anything
outside [a-z0-9] to spaces, FNV-1a 64 each token, fold the hash into a
signed bucket of a 64-dim vector, L2-normalize. Good enough separation for
routing a desk-scale agent fleet, and bitwise reproducible across runs.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

DIM = 64

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

_NON_ALNUM = re.compile(r"[^a-z0-9]+")


class DimensionMismatch(ValueError):
    """Vectors of different dimensions were combined."""


@dataclass(frozen=True)
class Embedding:
    """Unit-norm (or all-zero) vector of DIM floats."""

    values: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.values)

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.values)

    def to_list(self) -> list[float]:
        return list(self.values)

    @classmethod
    def from_list(cls, values: Sequence[float]) -> "Embedding":
        return cls(tuple(float(v) for v in values))

    @classmethod
    def zero(cls, dim: int = DIM) -> "Embedding":
        return cls((0.0,) * dim)


@dataclass(frozen=True)
class Centroid:
    """Normalized mean of a set of embeddings plus how many went in."""

    embedding: Embedding
    sample_count: int

    @classmethod
    def empty(cls, dim: int = DIM) -> "Centroid":
        return cls(Embedding.zero(dim), 0)


def tokenize(text: str) -> list[str]:
    return [t for t in _NON_ALNUM.sub(" ", text.lower()).split() if t]


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _normalize(acc: list[float]) -> tuple[float, ...]:
    norm = math.sqrt(sum(v * v for v in acc))
    if norm == 0.0:
        return tuple(0.0 for _ in acc)
    return tuple(v / norm for v in acc)


def embed_text(text: str, dim: int = DIM) -> Embedding:
    """Order-invariant embedding of `text`; zero vector when no tokens."""
    acc = [0.0] * dim
    for token in tokenize(text):
        h = fnv1a64(token.encode("utf-8"))
        sign = 1.0 if (h & 1) == 0 else -1.0
        acc[(h >> 1) % dim] += sign
    return Embedding(_normalize(acc))


def cosine(a: Embedding, b: Embedding) -> float:
    """dot(a,b)/(|a||b|); 0.0 when either vector is zero."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dim {a.dim} vs {b.dim}")
    na = math.sqrt(sum(v * v for v in a.values))
    nb = math.sqrt(sum(v * v for v in b.values))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return sum(x * y for x, y in zip(a.values, b.values)) / (na * nb)


def _pack(e: Embedding) -> bytes:
    return struct.pack("<%dd" % e.dim, *e.values)


def centroid_of(embeddings: Iterable[Embedding]) -> Centroid:
    """Component-wise mean re-normalized to unit length.

    Inputs are sorted by their packed-float byte representation before
    summing so the result is bitwise reproducible regardless of input
    order.
    """
    items = list(embeddings)
    if not items:
        return Centroid.empty()
    dim = items[0].dim
    for e in items:
        if e.dim != dim:
            raise DimensionMismatch(f"dim {e.dim} vs {dim}")
    acc = [0.0] * dim
    for e in sorted(items, key=_pack):
        for i, v in enumerate(e.values):
            acc[i] += v
    mean = [v / len(items) for v in acc]
    return Centroid(Embedding(_normalize(mean)), len(items))
