"""Finite-support particle configurations on Z^d.

A field is stored as sorted int64 site keys plus positive counts.  Sites are
packed into a single integer per site so that aggregation is a 1-d sort; the
packing preserves lexicographic order of coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np


class SiteCodec:
    """Packs d-dimensional integer sites into int64 keys (lexicographic order kept)."""

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("dimension must be positive")
        self.d = d
        self.bits = 63 // d
        self.offset = 1 << (self.bits - 1)
        self.mask = (1 << self.bits) - 1
        self.shifts = np.array([self.bits * (d - 1 - i) for i in range(d)], dtype=np.int64)
        # coordinates are kept well away from the field edges so one step never wraps
        self.limit = self.offset - 2

    def encode(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, self.d)
        if coords.size and np.abs(coords).max() > self.limit:
            raise OverflowError(f"coordinates exceed +/-{self.limit} for d={self.d}")
        return ((coords + self.offset) << self.shifts).sum(axis=1)

    def decode(self, keys: np.ndarray) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.int64)
        return ((keys[:, None] >> self.shifts) & self.mask) - self.offset

    def deltas(self, moves: np.ndarray) -> np.ndarray:
        """Key increments for an ``(k, d)`` array of displacements."""
        return (np.asarray(moves, dtype=np.int64) << self.shifts).sum(axis=1)

    def check_range(self, keys: np.ndarray) -> None:
        if keys.size and np.abs(self.decode(keys)).max() > self.limit:
            raise OverflowError("particle escaped the representable window")


@lru_cache(maxsize=None)
def codec(d: int) -> SiteCodec:
    return SiteCodec(d)


def aggregate(keys: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Merge duplicate keys, summing counts, and drop zero counts."""
    keys = np.asarray(keys, dtype=np.int64)
    counts = np.asarray(counts, dtype=np.int64)
    live = counts > 0
    if not live.all():
        keys, counts = keys[live], counts[live]
    if keys.size == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    order = np.argsort(keys, kind="stable")
    k, c = keys[order], counts[order]
    head = np.empty(k.size, dtype=bool)
    head[0] = True
    np.not_equal(k[1:], k[:-1], out=head[1:])
    starts = head.nonzero()[0]
    return k[starts], np.add.reduceat(c, starts)


@dataclass(frozen=True, eq=False)
class ParticleField:
    """Particle counts per site; every stored count is at least one."""

    d: int
    keys: np.ndarray
    counts: np.ndarray

    @classmethod
    def empty(cls, d: int) -> "ParticleField":
        return cls(d, np.empty(0, np.int64), np.empty(0, np.int64))

    @classmethod
    def from_keys(cls, d: int, keys: np.ndarray, counts: np.ndarray) -> "ParticleField":
        k, c = aggregate(keys, counts)
        return cls(d, k, c)

    @classmethod
    def from_coords(cls, coords, counts=None) -> "ParticleField":
        coords = np.asarray(coords, dtype=np.int64)
        if coords.ndim != 2:
            raise ValueError("coords must be an (m, d) array")
        d = coords.shape[1]
        if counts is None:
            counts = np.ones(len(coords), dtype=np.int64)
        return cls.from_keys(d, codec(d).encode(coords), counts)

    @classmethod
    def single(cls, site: Sequence[int], count: int = 1) -> "ParticleField":
        return cls.from_coords([list(site)], [count])

    @classmethod
    def from_dict(cls, mapping: Mapping[tuple, int], d: int | None = None) -> "ParticleField":
        if not mapping:
            if d is None:
                raise ValueError("dimension required for an empty mapping")
            return cls.empty(d)
        sites = list(mapping)
        return cls.from_coords([list(s) for s in sites], [mapping[s] for s in sites])

    @cached_property
    def coords(self) -> np.ndarray:
        return codec(self.d).decode(self.keys)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def num_sites(self) -> int:
        return int(self.keys.size)

    @property
    def is_empty(self) -> bool:
        return self.keys.size == 0

    def to_dict(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(v) for v in row): int(c) for row, c in zip(self.coords, self.counts)}

    def counts_at(self, sites: Iterable[Sequence[int]]) -> np.ndarray:
        q = codec(self.d).encode(np.array([list(s) for s in sites], dtype=np.int64))
        if self.keys.size == 0:
            return np.zeros(len(q), dtype=np.int64)
        pos = np.searchsorted(self.keys, q)
        pos_c = np.minimum(pos, self.keys.size - 1)
        hit = self.keys[pos_c] == q
        return np.where(hit, self.counts[pos_c], 0)

    def get(self, site: Sequence[int]) -> int:
        return int(self.counts_at([site])[0])

    def select(self, mask: np.ndarray) -> "ParticleField":
        return ParticleField(self.d, self.keys[mask], self.counts[mask])

    def __add__(self, other: "ParticleField") -> "ParticleField":
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        return ParticleField.from_keys(
            self.d, np.concatenate([self.keys, other.keys]), np.concatenate([self.counts, other.counts])
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParticleField):
            return NotImplemented
        return (
            self.d == other.d
            and np.array_equal(self.keys, other.keys)
            and np.array_equal(self.counts, other.counts)
        )

    def __repr__(self) -> str:
        return f"ParticleField(d={self.d}, {self.to_dict()})"
