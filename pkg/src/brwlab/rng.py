"""Replica random streams.

Replica ``k`` of a campaign seeded with ``master_seed`` draws from a Philox
counter-based generator keyed by the pair ``(master_seed, k)``, so any replica
can be replayed on its own and replicas never share state.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def replica_rng(master_seed: int, replica: int) -> np.random.Generator:
    key = np.array([master_seed & _MASK64, replica & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derived_seed(master_seed: int, label: str) -> int:
    """A stable sub-seed for a named part of a campaign."""
    acc = master_seed & _MASK64
    for ch in label.encode():
        acc = (acc * 1099511628211 ^ ch) & _MASK64
    return acc
