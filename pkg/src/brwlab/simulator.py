"""Forward simulation of the lazy, strict, generalised and continuous-time walks."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Sequence

import numpy as np

from .field import ParticleField, codec
from .lattice import BoxGeometry, KernelKind, unit_moves
from .offspring import OffspringLaw

DEFAULT_CAP = 1_000_000


class PopulationCapExceeded(RuntimeError):
    def __init__(self, population: int, cap: int, t):
        super().__init__(f"population {population} exceeded cap {cap} at t={t}")
        self.population = population
        self.cap = cap
        self.t = t


@dataclass(frozen=True)
class StepKernel:
    """Placement rule for children plus the parent's survival probability."""

    kind: KernelKind
    d: int = 2
    survival: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.d < 1:
            raise ValueError("dimension must be positive")
        if not 0.0 <= self.survival <= 1.0:
            raise ValueError("survival must lie in [0, 1]")
        if self.kind is not KernelKind.GENERALIZED and self.survival != 0.0:
            raise ValueError(f"{self.kind.value} kernel has no survival")

    @classmethod
    def for_law(cls, kind: KernelKind, d: int, law: OffspringLaw) -> "StepKernel":
        kind = KernelKind(kind)
        return cls(kind, d, law.survival if kind is KernelKind.GENERALIZED else 0.0)

    @cached_property
    def moves(self) -> np.ndarray:
        # the generalised walk places children like the strict one
        kind = KernelKind.LAZY if self.kind is KernelKind.LAZY else KernelKind.STRICT
        return unit_moves(self.d, kind)

    @cached_property
    def deltas(self) -> np.ndarray:
        return codec(self.d).deltas(self.moves)

    @property
    def n_moves(self) -> int:
        return len(self.moves)


def _uniform(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def step_field(
    field: ParticleField,
    kernel: StepKernel,
    law: OffspringLaw,
    rng: np.random.Generator,
    cap: int | None = None,
    t=None,
) -> ParticleField:
    """One generation: every particle draws a litter, children go to uniform neighbours.

    Sites are processed in lexicographic order.  Under the generalised kernel
    each parent also persists with probability ``kernel.survival``.
    """
    if field.is_empty:
        return field
    births = law.total_offspring(rng, field.counts)
    placed = rng.multinomial(births, _uniform(kernel.n_moves))
    keys = [(field.keys[:, None] + kernel.deltas[None, :]).ravel()]
    counts = [placed.ravel()]
    if kernel.survival > 0.0:
        keys.append(field.keys)
        counts.append(rng.binomial(field.counts, kernel.survival))
    out = ParticleField.from_keys(field.d, np.concatenate(keys), np.concatenate(counts))
    if field.d > 2:
        codec(field.d).check_range(out.keys)
    if cap is not None and out.total > cap:
        raise PopulationCapExceeded(out.total, cap, t)
    return out


def touches_boundary(field: ParticleField, n: int) -> bool:
    if field.is_empty:
        return False
    return bool(np.any(np.abs(field.coords).max(axis=1) == n))


@dataclass
class HittingTimes:
    """Outcome of one confined run.

    ``tau`` is None when the boundary was not reached: after extinction
    (``extinct``; tau is then infinite) or because the run was cut short by
    the horizon or the population cap (``censored``).
    """

    tau: int | None
    censored: bool = False
    extinct: bool = False
    reason: str = ""
    steps: int = 0
    final_population: int = 0
    max_population: int = 1
    components: dict = dc_field(default_factory=dict)

    def capped(self, horizon: int) -> int:
        """tau wedge horizon, with unobserved or infinite tau mapped to the horizon."""
        return horizon if self.tau is None else min(self.tau, horizon)

    def within(self, t: int) -> bool:
        return self.tau is not None and self.tau <= t


def run_hitting(
    start: Sequence[int],
    box: BoxGeometry,
    kernel: StepKernel,
    law: OffspringLaw,
    horizon: int,
    cap: int,
    rng: np.random.Generator,
    record_at: int | None = None,
) -> HittingTimes:
    """First generation at which some particle sits on the boundary of ``box``.

    With ``record_at`` the run continues (if needed) up to that generation and
    the population size there is stored in ``components['pop_at']``.
    """
    if len(start) != box.d or kernel.d != box.d:
        raise ValueError("dimension mismatch between start, kernel and box")
    if not box.contains(start):
        raise ValueError(f"start {tuple(start)} outside the box")
    if record_at is not None and not 0 <= record_at <= horizon:
        raise ValueError("record_at must lie in [0, horizon]")
    field = ParticleField.single(start)
    res = HittingTimes(None, final_population=1)
    if box.boundary_contains(start):
        res.tau, res.reason = 0, "boundary_start"
    t = 0
    while True:
        if t == record_at:
            res.components["pop_at"] = field.total
        if res.tau is None and field.is_empty:
            res.extinct, res.reason = True, "extinct"
        resolved = res.tau is not None or res.extinct
        if (resolved and (record_at is None or t >= record_at)) or t >= horizon:
            break
        t += 1
        try:
            field = step_field(field, kernel, law, rng, cap, t)
        except PopulationCapExceeded as exc:
            res.max_population = max(res.max_population, exc.population)
            if not resolved:
                res.censored, res.reason = True, "cap"
            res.steps, res.final_population = t, exc.population
            return res
        res.max_population = max(res.max_population, field.total)
        if res.tau is None and touches_boundary(field, box.n):
            res.tau, res.reason = t, "hit"
    if res.tau is None and not res.extinct:
        res.censored, res.reason = True, "horizon"
    res.steps, res.final_population = t, field.total
    return res


def evolve(
    start: Sequence[int],
    kernel: StepKernel,
    law: OffspringLaw,
    t: int,
    cap: int,
    rng: np.random.Generator,
) -> ParticleField:
    """Free (unconfined) evolution for ``t`` generations; raises on cap overflow."""
    field = ParticleField.single(start)
    for s in range(1, t + 1):
        if field.is_empty:
            break
        field = step_field(field, kernel, law, rng, cap, s)
    return field


def site_count_path(
    start: Sequence[int],
    kernel: StepKernel,
    law: OffspringLaw,
    t: int,
    probe: Sequence[int],
    cap: int,
    rng: np.random.Generator,
) -> int:
    return evolve(start, kernel, law, t, cap, rng).get(probe)


def simulate_ct(
    start: Sequence[int],
    lam: float,
    t: float,
    cap: int,
    rng: np.random.Generator,
) -> ParticleField:
    """Exact event-driven simulation of the continuous-time walk up to time ``t``.

    Each particle dies at rate 1 and gives birth at rate ``lam`` onto each of
    its 2d neighbours.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    d = len(start)
    moves = [tuple(int(v) for v in m) for m in unit_moves(d, KernelKind.STRICT)]
    n_moves = len(moves)
    per_particle = 1.0 + n_moves * lam
    p_death = 1.0 / per_particle
    particles = [tuple(int(c) for c in start)]
    clock = 0.0
    while particles:
        m = len(particles)
        clock += rng.exponential(1.0 / (m * per_particle))
        if clock > t:
            break
        j = int(rng.integers(m))
        if rng.random() < p_death:
            particles[j] = particles[-1]
            particles.pop()
        else:
            mv = moves[int(rng.integers(n_moves))]
            x = particles[j]
            particles.append(tuple(a + b for a, b in zip(x, mv)))
            if len(particles) > cap:
                raise PopulationCapExceeded(len(particles), cap, clock)
    if not particles:
        return ParticleField.empty(d)
    return ParticleField.from_coords(np.array(particles, dtype=np.int64))
