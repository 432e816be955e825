"""Finite-support offspring laws."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

NORMALIZATION_TOL = 1e-12


class OffspringLawError(ValueError):
    pass


class NegativeProbability(OffspringLawError):
    pass


class NotNormalized(OffspringLawError):
    pass


@dataclass(frozen=True)
class OffspringLaw:
    """Offspring probabilities ``probs[i] = P(i children)`` plus a survival probability.

    ``survival`` is the probability that the parent itself persists into the
    next generation (zero for the lazy and strict walks).
    """

    probs: tuple[float, ...]
    survival: float = 0.0
    _cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        probs = [float(p) for p in self.probs]
        if not probs:
            raise NotNormalized("empty probability vector")
        for i, p in enumerate(probs):
            if not math.isfinite(p) or p < 0.0:
                raise NegativeProbability(f"P_{i} = {p}")
        for i, p in enumerate(probs):
            if p > 1.0:
                raise NotNormalized(f"P_{i} = {p} exceeds 1")
        total = math.fsum(probs)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise NotNormalized(f"probabilities sum to {total!r}")
        while len(probs) > 1 and probs[-1] == 0.0:
            probs.pop()
        s = float(self.survival)
        if not (0.0 <= s <= 1.0):
            raise OffspringLawError(f"survival probability {s} outside [0, 1]")
        object.__setattr__(self, "probs", tuple(probs))
        object.__setattr__(self, "survival", s)
        cdf = np.cumsum(np.array(probs))
        cdf[-1] = 1.0
        object.__setattr__(self, "_cdf", cdf)

    @property
    def max_offspring(self) -> int:
        return len(self.probs) - 1

    @property
    def pvals(self) -> np.ndarray:
        return np.array(self.probs)

    def pgf(self, s):
        """Generating function sum_i P_i s^i; accepts scalars or arrays in [0, 1]."""
        arr = np.asarray(s, dtype=float)
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("pgf argument must lie in [0, 1]")
        out = np.zeros_like(arr)
        for p in reversed(self.probs):
            out = out * arr + p
        return float(out) if out.ndim == 0 else out

    def mean(self) -> float:
        return math.fsum(i * p for i, p in enumerate(self.probs))

    def variance(self) -> float:
        m = self.mean()
        return math.fsum((i - m) ** 2 * p for i, p in enumerate(self.probs))

    def sample(self, rng: np.random.Generator) -> int:
        """One draw by inverse CDF."""
        return int(np.searchsorted(self._cdf, rng.random(), side="right"))

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.searchsorted(self._cdf, rng.random(size), side="right")

    def total_offspring(self, rng: np.random.Generator, parents: np.ndarray) -> np.ndarray:
        """Total children of ``parents[k]`` independent parents, for every k.

        Draws the number of parents having each litter size jointly, which has
        the same law as summing independent per-parent draws.
        """
        parents = np.asarray(parents, dtype=np.int64)
        if self.max_offspring == 0:
            return np.zeros_like(parents)
        litters = rng.multinomial(parents, self.probs)
        return litters @ np.arange(self.max_offspring + 1)

    def to_dict(self) -> dict:
        return {"probs": list(self.probs), "survival": self.survival}


def validate(probs: Sequence[float], survival: float = 0.0) -> OffspringLaw:
    return OffspringLaw(tuple(probs), survival)


def point_mass(k: int, survival: float = 0.0) -> OffspringLaw:
    return OffspringLaw(tuple([0.0] * k + [1.0]), survival)


def default_survival(n_steps: int) -> float:
    """Per-step survival sqrt(1 - 1/N) of the rescaled discrete process."""
    return math.sqrt(1.0 - 1.0 / n_steps)


def bernoulli_sum_law(lam: float, n_steps: int, survival: float | None = None) -> OffspringLaw:
    """Law of X_1 + ... + X_4 with X_j iid Bernoulli(sqrt(lam / N)).

    The survival probability defaults to sqrt(1 - 1/N).
    """
    if lam <= 0 or n_steps < 1 or lam / n_steps >= 1:
        raise ValueError(f"need lam > 0 and lam / N < 1, got lam={lam}, N={n_steps}")
    p = math.sqrt(lam / n_steps)
    probs = [math.comb(4, i) * p**i * (1 - p) ** (4 - i) for i in range(5)]
    pi = default_survival(n_steps) if survival is None else survival
    return OffspringLaw(tuple(probs), pi)

