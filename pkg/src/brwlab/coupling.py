"""Pathwise reflection couplings of two planar walks started at neighbouring sites.

Each coupled process is split into a shared part sigma (identical on both
sides) and an antisymmetric part alpha (alpha^1 is the mirror image of
alpha^0 and the two live on opposite sides of the axis).  One coupled
generation pairs

* sigma particles at the same site: shared litter size, shared moves;
* alpha particles on the line next to the axis with their mirror partners
  ("synthetic" pairing): children that land on a common site become sigma;
* all other alpha pairs by mirror-conjugate moves ("antithetic" pairing).

Litters within a site are aggregated: the number of parents with each litter
size and the number of children per move are drawn jointly, which has the
same law as drawing particle by particle.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from enum import Enum
from typing import Callable

import numpy as np

from .field import ParticleField, aggregate, codec
from .lattice import Axis, BoxGeometry, KernelKind, classify_array, reflect_array, unit_moves
from .offspring import OffspringLaw
from .simulator import PopulationCapExceeded, StepKernel


class CouplingKind(str, Enum):
    AXIS_SHIFT_1 = "axis1"
    DIAG_SHIFT = "diag"
    AXIS_SHIFT_2 = "axis2"


class InvariantViolation(RuntimeError):
    def __init__(self, problems: list[str], state: "CoupledState"):
        super().__init__("; ".join(problems) + "\nstate: " + repr(state.dump()))
        self.problems = problems
        self.state = state


@dataclass(frozen=True)
class CouplingSpec:
    kind: CouplingKind
    kernel: KernelKind
    axis: Axis
    shifted_start: tuple[int, int]
    # alpha^0 move index -> alpha^1 move index, next to the axis / elsewhere
    synthetic: tuple[int, ...]
    antithetic: tuple[int, ...]
    # alpha^0 moves from the axis-adjacent line whose child pair is relabelled sigma
    relabel: tuple[bool, ...]
    adjacent: Callable[[np.ndarray], np.ndarray]

    @property
    def moves(self) -> np.ndarray:
        return unit_moves(2, self.kernel)


# move order: lazy (stay, E, W, N, S); strict (E, W, N, S)
SPECS = {
    CouplingKind.AXIS_SHIFT_1: CouplingSpec(
        CouplingKind.AXIS_SHIFT_1, KernelKind.LAZY, Axis.V_HALF, (1, 0),
        synthetic=(2, 0, 1, 3, 4),
        antithetic=(0, 2, 1, 3, 4),
        relabel=(True, True, False, False, False),
        adjacent=lambda c: c[:, 0] == 0,
    ),
    CouplingKind.DIAG_SHIFT: CouplingSpec(
        CouplingKind.DIAG_SHIFT, KernelKind.STRICT, Axis.DIAG_ONE, (1, 1),
        synthetic=(3, 2, 1, 0),
        antithetic=(3, 2, 1, 0),
        relabel=(True, False, True, False),
        adjacent=lambda c: c[:, 0] + c[:, 1] == 0,
    ),
    CouplingKind.AXIS_SHIFT_2: CouplingSpec(
        CouplingKind.AXIS_SHIFT_2, KernelKind.STRICT, Axis.V_ONE, (2, 0),
        synthetic=(1, 0, 2, 3),
        antithetic=(1, 0, 2, 3),
        relabel=(True, False, False, False),
        adjacent=lambda c: c[:, 0] == 0,
    ),
}


def spec_of(kind) -> CouplingSpec:
    return SPECS[CouplingKind(kind)]


def kernel_for(kind, law: OffspringLaw) -> StepKernel:
    """The marginal step kernel of either side of the coupling."""
    spec = spec_of(kind)
    if spec.kind is CouplingKind.AXIS_SHIFT_2:
        return StepKernel(KernelKind.GENERALIZED, 2, law.survival)
    return StepKernel(spec.kernel, 2)


def _check_law(kind: CouplingKind, law: OffspringLaw) -> float:
    if kind is not CouplingKind.AXIS_SHIFT_2 and law.survival != 0.0:
        raise ValueError(f"{kind.value} coupling has no survival; got {law.survival}")
    return law.survival


@dataclass
class CoupledState:
    kind: CouplingKind
    t: int
    sigma0: ParticleField
    alpha0: ParticleField
    sigma1: ParticleField
    alpha1: ParticleField
    # marginals as produced by the step before labelling; None at t = 0
    raw0: ParticleField | None = None
    raw1: ParticleField | None = None

    def dump(self) -> dict:
        out = {"kind": self.kind.value, "t": self.t}
        for name in ("sigma0", "alpha0", "sigma1", "alpha1", "raw0", "raw1"):
            f = getattr(self, name)
            out[name] = None if f is None else {str(k): v for k, v in f.to_dict().items()}
        return out


def init_coupled(kind) -> CoupledState:
    spec = spec_of(kind)
    empty = ParticleField.empty(2)
    return CoupledState(
        spec.kind, 0,
        sigma0=empty, alpha0=ParticleField.single((0, 0)),
        sigma1=empty, alpha1=ParticleField.single(spec.shifted_start),
    )


def marginal_of(state: CoupledState, which: int) -> ParticleField:
    if which == 0:
        return state.sigma0 + state.alpha0
    if which == 1:
        return state.sigma1 + state.alpha1
    raise ValueError("which must be 0 or 1")


def _mirror_field(axis: Axis, f: ParticleField) -> ParticleField:
    if f.is_empty:
        return f
    return ParticleField.from_coords(reflect_array(axis, f.coords), f.counts)


def check_invariants(state: CoupledState) -> list[str]:
    """Violated invariants (empty list when the state is consistent)."""
    spec = spec_of(state.kind)
    problems = []
    for side, raw in ((0, state.raw0), (1, state.raw1)):
        if raw is not None and raw != marginal_of(state, side):
            problems.append(f"decomposition fails on side {side}")
    if state.sigma0 != state.sigma1:
        problems.append("sigma0 != sigma1")
    if not state.alpha0.is_empty and np.any(classify_array(spec.axis, state.alpha0.coords) != -1):
        problems.append("alpha0 has particles outside the near half")
    if not state.alpha1.is_empty and np.any(classify_array(spec.axis, state.alpha1.coords) != 1):
        problems.append("alpha1 has particles outside the far half")
    if _mirror_field(spec.axis, state.alpha0) != state.alpha1:
        problems.append("alpha1 is not the mirror image of alpha0")
    return problems


def _pair_alpha(spec: CouplingSpec, a0: ParticleField, a1: ParticleField) -> np.ndarray:
    """Row permutation of alpha1 aligning each alpha1 site with its alpha0 mirror."""
    if a1.is_empty:
        return np.empty(0, dtype=np.int64)
    mkeys = codec(2).encode(reflect_array(spec.axis, a1.coords))
    order = np.argsort(mkeys, kind="stable")
    if not (np.array_equal(mkeys[order], a0.keys) and np.array_equal(a1.counts[order], a0.counts)):
        raise ValueError("alpha fields are not mirror images")
    return order


def coupled_step(
    state: CoupledState,
    law: OffspringLaw,
    rng: np.random.Generator,
    cap: int | None = None,
    check: bool = True,
) -> CoupledState:
    """Advance both coupled processes by one generation."""
    spec = spec_of(state.kind)
    pi = _check_law(spec.kind, law)
    moves = spec.moves
    k = len(moves)
    deltas = codec(2).deltas(moves)
    uniform = np.full(k, 1.0 / k)
    syn = np.array(spec.synthetic)
    anti = np.array(spec.antithetic)
    relabel_moves = np.array(spec.relabel)

    keys = {0: {"sigma": [], "alpha": []}, 1: {"sigma": [], "alpha": []}}
    cnts = {0: {"sigma": [], "alpha": []}, 1: {"sigma": [], "alpha": []}}

    def put(side, label, kk, cc):
        keys[side][label].append(np.asarray(kk, dtype=np.int64).ravel())
        cnts[side][label].append(np.asarray(cc, dtype=np.int64).ravel())

    # sigma pairs: identical evolution
    s0, s1 = state.sigma0, state.sigma1
    if not s0.is_empty:
        if not (np.array_equal(s0.keys, s1.keys) and np.array_equal(s0.counts, s1.counts)):
            raise InvariantViolation(["sigma0 != sigma1 before step"], state)
        births = law.total_offspring(rng, s0.counts)
        placed = rng.multinomial(births, uniform)
        put(0, "sigma", s0.keys[:, None] + deltas, placed)
        put(1, "sigma", s1.keys[:, None] + deltas, placed)
        if pi > 0.0:
            surv = rng.binomial(s0.counts, pi)
            put(0, "sigma", s0.keys, surv)
            put(1, "sigma", s1.keys, surv)

    # alpha pairs: synthetic next to the axis, antithetic elsewhere
    a0, a1 = state.alpha0, state.alpha1
    if not a0.is_empty or not a1.is_empty:
        try:
            order = _pair_alpha(spec, a0, a1)
        except ValueError as exc:
            raise InvariantViolation([str(exc)], state) from None
        p1_keys = a1.keys[order]
        births = law.total_offspring(rng, a0.counts)
        placed = rng.multinomial(births, uniform)
        adj = spec.adjacent(a0.coords)
        partner = np.where(adj[:, None], syn[None, :], anti[None, :])
        relabel = adj[:, None] & relabel_moves[None, :]
        child0 = a0.keys[:, None] + deltas[None, :]
        child1 = p1_keys[:, None] + deltas[partner]
        put(0, "sigma", child0[relabel], placed[relabel])
        put(1, "sigma", child1[relabel], placed[relabel])
        put(0, "alpha", child0[~relabel], placed[~relabel])
        put(1, "alpha", child1[~relabel], placed[~relabel])
        if pi > 0.0:
            surv = rng.binomial(a0.counts, pi)
            put(0, "alpha", a0.keys, surv)
            put(1, "alpha", p1_keys, surv)

    def build(side, label):
        if not keys[side][label]:
            return ParticleField.empty(2)
        return ParticleField.from_keys(2, np.concatenate(keys[side][label]), np.concatenate(cnts[side][label]))

    def raw(side):
        ks = keys[side]["sigma"] + keys[side]["alpha"]
        if not ks:
            return ParticleField.empty(2)
        cs = cnts[side]["sigma"] + cnts[side]["alpha"]
        return ParticleField.from_keys(2, np.concatenate(ks), np.concatenate(cs))

    new = CoupledState(
        spec.kind, state.t + 1,
        sigma0=build(0, "sigma"), alpha0=build(0, "alpha"),
        sigma1=build(1, "sigma"), alpha1=build(1, "alpha"),
        raw0=raw(0), raw1=raw(1),
    )
    if cap is not None:
        pop = max(new.raw0.total, new.raw1.total)
        if pop > cap:
            raise PopulationCapExceeded(pop, cap, new.t)
    if check:
        problems = check_invariants(new)
        if problems:
            raise InvariantViolation(problems, new)
    return new


# -- hitting times ------------------------------------------------------------------


def _first(current, t, cond):
    return t if current is None and cond else current


def _any(mask) -> bool:
    return bool(np.any(mask))


@dataclass
class CoupledHitting:
    kind: CouplingKind
    n: int
    S: int | None = None
    S1: int | None = None
    T0: int | None = None
    T1: int | None = None
    U0: int | None = None
    U1: int | None = None
    tau0: int | None = None
    tau1: int | None = None
    extinct0: bool = False
    extinct1: bool = False
    censored: bool = False
    reason: str = ""
    steps: int = 0
    max_population: int = 1
    checks: int = 0
    identity_ok: bool = True
    extra: dict = dc_field(default_factory=dict)

    @property
    def ordered(self) -> bool:
        """tau1 <= tau0 whenever tau0 was observed."""
        if self.tau0 is None:
            return True
        return self.tau1 is not None and self.tau1 <= self.tau0

    def resolved(self, side: int) -> bool:
        tau, ext = (self.tau0, self.extinct0) if side == 0 else (self.tau1, self.extinct1)
        return tau is not None or ext


def _on_boundary(coords: np.ndarray, n: int) -> np.ndarray:
    return np.abs(coords).max(axis=1) == n


def _record(h: CoupledHitting, state: CoupledState, n: int) -> None:
    t = state.t
    spec = spec_of(state.kind)
    s0, s1, a0, a1 = state.sigma0, state.sigma1, state.alpha0, state.alpha1
    m0, m1 = marginal_of(state, 0), marginal_of(state, 1)
    if not s0.is_empty:
        h.S = _first(h.S, t, _any(_on_boundary(s0.coords, n)))
    if not s1.is_empty:
        h.S1 = _first(h.S1, t, _any(_on_boundary(s1.coords, n)))
    if spec.kind is CouplingKind.DIAG_SHIFT:
        if not a0.is_empty:
            c = a0.coords
            south = (c[:, 1] == -n) & (np.abs(c[:, 0]) <= n)
            west = (c[:, 0] == -n) & (np.abs(c[:, 1]) <= n)
            h.T0 = _first(h.T0, t, _any(south | west))
        if not a1.is_empty:
            c = a1.coords
            north = (c[:, 1] == n) & (np.abs(c[:, 0]) <= n)
            east = (c[:, 0] == n) & (np.abs(c[:, 1]) <= n)
            h.T1 = _first(h.T1, t, _any(north | east))
    else:
        if not a0.is_empty:
            c = a0.coords
            h.T0 = _first(h.T0, t, _any((c[:, 0] == -n) & (np.abs(c[:, 1]) <= n)))
            h.U0 = _first(h.U0, t, _any((np.abs(c[:, 1]) == n) & (np.abs(c[:, 0]) <= n)))
        if not a1.is_empty:
            c = a1.coords
            h.T1 = _first(h.T1, t, _any((c[:, 0] == n) & (np.abs(c[:, 1]) <= n)))
            h.U1 = _first(h.U1, t, _any((np.abs(c[:, 1]) == n) & (np.abs(c[:, 0]) <= n)))
    if h.tau0 is None and not m0.is_empty and _any(_on_boundary(m0.coords, n)):
        h.tau0 = t
        h.identity_ok &= t == _min_defined(h.S, h.T0, h.U0)
    if h.tau1 is None and not m1.is_empty and _any(_on_boundary(m1.coords, n)):
        h.tau1 = t
        h.identity_ok &= t == _min_defined(h.S1, h.T1, h.U1)
    if h.tau0 is None and m0.is_empty:
        h.extinct0 = True
    if h.tau1 is None and m1.is_empty:
        h.extinct1 = True
    h.max_population = max(h.max_population, m0.total, m1.total)


def _min_defined(*vals):
    vals = [v for v in vals if v is not None]
    return min(vals) if vals else None


def run_coupled_hitting(
    kind,
    box: BoxGeometry,
    law: OffspringLaw,
    horizon: int,
    cap: int,
    rng: np.random.Generator,
    check_every: int = 1,
    record_at: int | None = None,
) -> CoupledHitting:
    """Run the coupling until both hitting times of ``box`` are resolved.

    A side is resolved when its marginal touches the boundary or dies out.
    Components: S (sigma on the boundary), T0/T1 (alpha on the far wall of
    each side), U0/U1 (alpha on the top or bottom wall; axis couplings only).
    With ``record_at`` the run lasts at least that many generations and both
    population sizes there are stored in ``extra`` as pop0_at / pop1_at.
    """
    if box.d != 2:
        raise ValueError("couplings are planar")
    if record_at is not None and not 0 <= record_at <= horizon:
        raise ValueError("record_at must lie in [0, horizon]")
    kind = CouplingKind(kind)
    state = init_coupled(kind)
    h = CoupledHitting(kind, box.n)
    t = 0
    while True:
        _record(h, state, box.n)
        if t == record_at:
            h.extra["pop0_at"] = state.sigma0.total + state.alpha0.total
            h.extra["pop1_at"] = state.sigma1.total + state.alpha1.total
        if h.resolved(0) and h.resolved(1) and (record_at is None or t >= record_at):
            h.reason = "resolved"
            break
        if t >= horizon:
            h.censored, h.reason = True, "horizon"
            break
        t += 1
        check = check_every > 0 and t % check_every == 0
        try:
            state = coupled_step(state, law, rng, cap, check=check)
        except PopulationCapExceeded as exc:
            h.censored, h.reason = True, "cap"
            h.max_population = max(h.max_population, exc.population)
            break
        h.checks += int(check)
    h.steps = t
    return h


@dataclass
class CoupledRun:
    """Summary of a free (unconfined) coupled run."""

    steps: int
    censored: bool
    checks: int
    final: CoupledState
    max_population: int
    observations: list = dc_field(default_factory=list)


def run_coupled_free(
    kind,
    law: OffspringLaw,
    steps: int,
    cap: int,
    rng: np.random.Generator,
    observe: Callable[[CoupledState], object] | None = None,
    check_every: int = 1,
) -> CoupledRun:
    """Evolve the coupling for ``steps`` generations without confinement.

    ``observe`` is called on the initial state and after every step; its
    return values are collected in ``observations``.
    """
    state = init_coupled(kind)
    obs = [observe(state)] if observe else []
    peak = 1
    checks = 0
    for t in range(1, steps + 1):
        check = check_every > 0 and t % check_every == 0
        try:
            state = coupled_step(state, law, rng, cap, check=check)
        except PopulationCapExceeded as exc:
            return CoupledRun(t, True, checks, state, max(peak, exc.population), obs)
        checks += int(check)
        peak = max(peak, state.raw0.total, state.raw1.total)
        if observe:
            obs.append(observe(state))
        if state.raw0.is_empty and state.raw1.is_empty:
            return CoupledRun(t, False, checks, state, peak, obs)
    return CoupledRun(steps, False, checks, state, peak, obs)


def even_diagonal_exceptions(state: CoupledState) -> int:
    """Count probe sites where the sigma-domination chain fails.

    Probes: x >= 2, y >= 0, x + y even.  On those sites side 0 must consist of
    sigma particles only, equal to sigma on side 1, and be at most the
    side-1 marginal.
    """
    m0 = marginal_of(state, 0)
    if m0.is_empty:
        return 0
    c = m0.coords
    probe = (c[:, 0] >= 2) & (c[:, 1] >= 0) & ((c[:, 0] + c[:, 1]) % 2 == 0)
    if not probe.any():
        return 0
    sites = [tuple(r) for r in c[probe]]
    count0 = m0.counts[probe]
    sig0 = state.sigma0.counts_at(sites)
    sig1 = state.sigma1.counts_at(sites)
    tot1 = marginal_of(state, 1).counts_at(sites)
    bad = (count0 != sig0) | (sig0 != sig1) | (sig1 > tot1)
    return int(bad.sum())
