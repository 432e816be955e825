"""Deterministic reference values: escape probabilities, hitting-time CDFs and mean fields.

No-escape probabilities factorise over the independent subtrees of the first
generation, so g_t(x) = P(tau^x > t) obeys

    g_{t+1}(x) = f(mean of g_t over the neighbourhood of x),   g = 0 on the boundary,

with f the offspring generating function and g_0 = 1 on the interior.  The
iterates are the exact finite-time survival functions and decrease to
P(tau^x = infinity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lattice import BoxGeometry, KernelKind, Site, leq_partial
from .offspring import OffspringLaw

DEFAULT_EPS = 1e-12
DEFAULT_MAX_ITER = 1_000_000


class OracleError(RuntimeError):
    pass


class NonConvergence(OracleError):
    def __init__(self, residual: float, iterations: int):
        super().__init__(f"fixed point not reached after {iterations} sweeps (residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


@dataclass
class ScalarGrid:
    """Per-site values on the window of sup-radius ``radius`` around ``center``."""

    values: np.ndarray
    center: Site
    radius: int
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.values.ndim

    def _index(self, x: Sequence[int]) -> tuple[int, ...]:
        idx = tuple(int(a) - int(c) + self.radius for a, c in zip(x, self.center))
        if len(idx) != self.d or any(i < 0 or i > 2 * self.radius for i in idx):
            raise KeyError(f"{tuple(x)} outside the grid window")
        return idx

    def value(self, x: Sequence[int]) -> float:
        return float(self.values[self._index(x)])

    def __getitem__(self, x: Sequence[int]) -> float:
        return self.value(x)

    def sites(self):
        for idx in np.ndindex(*self.values.shape):
            yield tuple(int(i) - self.radius + int(c) for i, c in zip(idx, self.center))

    def rows(self) -> list[tuple]:
        return [(*x, float(self.values[self._index(x)])) for x in self.sites()]


# -- stencils ----------------------------------------------------------------------


def _neighbor_sum(g: np.ndarray) -> np.ndarray:
    """Sum over the 2d unit neighbours, zero outside the array."""
    padded = np.pad(g, 1)
    out = np.zeros_like(g)
    d = g.ndim
    core = tuple(slice(1, -1) for _ in range(d))
    for ax in range(d):
        lo = list(core)
        hi = list(core)
        lo[ax] = slice(0, -2)
        hi[ax] = slice(2, None)
        out += padded[tuple(lo)] + padded[tuple(hi)]
    return out


def _neighborhood_mean(g: np.ndarray, kind: KernelKind) -> np.ndarray:
    s = _neighbor_sum(g)
    if kind is KernelKind.LAZY:
        return (s + g) / (2 * g.ndim + 1)
    return s / (2 * g.ndim)


def _interior_mask(box: BoxGeometry) -> np.ndarray:
    r = np.arange(-box.n, box.n + 1)
    grids = np.meshgrid(*([r] * box.d), indexing="ij")
    sup = np.max(np.abs(np.stack(grids)), axis=0)
    return sup < box.n


def _check_kernel(kind: KernelKind, law: OffspringLaw) -> KernelKind:
    kind = KernelKind(kind)
    if kind is KernelKind.GENERALIZED:
        raise OracleError("the fixed-point oracle covers the lazy and strict kernels only")
    return kind


def _sweep(g: np.ndarray, interior: np.ndarray, kind: KernelKind, law: OffspringLaw) -> np.ndarray:
    avg = np.clip(_neighborhood_mean(g, kind), 0.0, 1.0)
    return np.where(interior, law.pgf(avg), 0.0)


def survival_iterates(box: BoxGeometry, kind: KernelKind, law: OffspringLaw):
    """Yield g_0, g_1, ... (P(tau^x > t) on the box grid), asserting monotone decrease."""
    kind = _check_kernel(kind, law)
    interior = _interior_mask(box)
    g = interior.astype(float)
    yield g
    while True:
        nxt = _sweep(g, interior, kind, law)
        if np.any(nxt > g):
            raise OracleError("survival iterates failed to decrease")
        g = nxt
        yield g


def escape_probability_grid(
    box: BoxGeometry,
    kind: KernelKind,
    law: OffspringLaw,
    eps: float = DEFAULT_EPS,
    max_iter: int = DEFAULT_MAX_ITER,
    strict: bool = True,
) -> ScalarGrid:
    """p_n(x) = P(tau^x < infinity) on the whole box (1 on the boundary).

    Raises ``NonConvergence`` when ``max_iter`` sweeps do not bring the sup-norm
    change below ``eps``, unless ``strict`` is false, in which case the last
    iterate is returned with its residual recorded in ``meta``.
    """
    it = survival_iterates(box, kind, law)
    g = next(it)
    residual = math.inf
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        nxt = next(it)
        residual = float(np.max(g - nxt))
        g = nxt
        if residual < eps:
            break
    if residual >= eps and strict:
        raise NonConvergence(residual, sweeps)
    return ScalarGrid(
        values=1.0 - g,
        center=(0,) * box.d,
        radius=box.n,
        label="escape_probability",
        meta={"residual": residual, "iterations": sweeps, "kernel": KernelKind(kind).value, "n": box.n},
    )


def hitting_cdf_grid(box: BoxGeometry, kind: KernelKind, law: OffspringLaw, t_max: int) -> np.ndarray:
    """Array ``cdf[t, *idx] = P(tau^x <= t)`` for t = 0..t_max over the box grid."""
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    it = survival_iterates(box, kind, law)
    out = np.empty((t_max + 1,) + box.shape)
    for t in range(t_max + 1):
        out[t] = 1.0 - next(it)
    return out


def cdf_at(cdf: np.ndarray, box: BoxGeometry, x: Sequence[int]) -> np.ndarray:
    """The CDF curve t -> P(tau^x <= t) for one site."""
    return cdf[(slice(None),) + box.index(x)]


# -- mean fields -------------------------------------------------------------------


def expected_counts_discrete(
    start: Sequence[int],
    kind: KernelKind,
    law: OffspringLaw,
    t: int,
    truncation_radius: int,
    survival: float | None = None,
) -> ScalarGrid:
    """Mean particle numbers m_t(y) after ``t`` generations from one particle at ``start``.

    m_{t+1}(y) = mean(law) * (sum of m_t over the neighbourhood of y) / |neighbourhood|
                 + survival * m_t(y)
    """
    kind = KernelKind(kind)
    if truncation_radius < t:
        raise ValueError(f"truncation radius {truncation_radius} < t = {t}: mass would leave the window")
    pi = law.survival if survival is None else survival
    if kind is not KernelKind.GENERALIZED and pi != 0.0:
        raise ValueError("lazy and strict kernels have no survival")
    d = len(start)
    R = truncation_radius
    m = np.zeros((2 * R + 1,) * d)
    m[(R,) * d] = 1.0
    mu = law.mean()
    k = 2 * d + 1 if kind is KernelKind.LAZY else 2 * d
    for _ in range(t):
        s = _neighbor_sum(m)
        if kind is KernelKind.LAZY:
            s = s + m
        m = mu * s / k + pi * m
    return ScalarGrid(m, tuple(int(c) for c in start), R, "expected_counts_discrete",
                      {"t": t, "kernel": kind.value, "survival": pi})


def default_ct_step(d: int, lam: float) -> float:
    return min(0.01, 0.1 / (1.0 + 2 * d * lam))


def _rk4(m: np.ndarray, lam: float, t: float, dt: float) -> np.ndarray:
    steps = max(1, math.ceil(t / dt - 1e-12))
    h = t / steps

    def rhs(u):
        return -u + lam * _neighbor_sum(u)

    for _ in range(steps):
        k1 = rhs(m)
        k2 = rhs(m + 0.5 * h * k1)
        k3 = rhs(m + 0.5 * h * k2)
        k4 = rhs(m + h * k3)
        m = m + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return m


def expected_counts_ct(
    start: Sequence[int],
    lam: float,
    t: float,
    truncation_radius: int,
    dt: float | None = None,
) -> ScalarGrid:
    """Mean field of the continuous-time walk: dm/dt = -m + lam * (neighbour sum of m).

    Classical RK4 on the truncated window; ``meta['error_estimate']`` is the
    sup-norm difference against a run with half the step.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    d = len(start)
    if dt is None:
        dt = default_ct_step(d, lam)
    if dt * (1 + 2 * d * lam) > 2.5:
        raise OracleError(f"step {dt} outside the RK4 stability region")
    R = truncation_radius
    m0 = np.zeros((2 * R + 1,) * d)
    m0[(R,) * d] = 1.0
    if t == 0:
        return ScalarGrid(m0, tuple(start), R, "expected_counts_ct", {"t": t, "lam": lam, "error_estimate": 0.0})
    coarse = _rk4(m0, lam, t, dt)
    fine = _rk4(m0, lam, t, dt / 2)
    err = float(np.max(np.abs(coarse - fine)))
    return ScalarGrid(coarse, tuple(int(c) for c in start), R, "expected_counts_ct",
                      {"t": t, "lam": lam, "dt": dt, "error_estimate": err})


# -- identities from the contradiction argument -----------------------------------


def _planar_strict_q(box: BoxGeometry, law: OffspringLaw, eps: float) -> ScalarGrid:
    if box.d != 2:
        raise ValueError("identity checks are planar")
    p = escape_probability_grid(box, KernelKind.STRICT, law, eps=eps)
    return ScalarGrid(1.0 - p.values, p.center, p.radius, "no_escape", p.meta)


def check_root_identity(box: BoxGeometry, law: OffspringLaw, eps: float = DEFAULT_EPS) -> float:
    """|q(0,0) - f(q(1,0))| for the strict kernel (all four neighbours of the origin agree)."""
    q = _planar_strict_q(box, law, eps)
    return abs(q[(0, 0)] - law.pgf(q[(1, 0)]))


def check_neighbor_inequality(box: BoxGeometry, law: OffspringLaw, eps: float = DEFAULT_EPS) -> float:
    """f(q(0,0)) - q(1,0); nonnegative when escape is monotone along the first axis."""
    if box.n < 2:
        raise ValueError("needs n >= 2")
    q = _planar_strict_q(box, law, eps)
    return law.pgf(q[(0, 0)]) - q[(1, 0)]


# -- monotonicity audits -----------------------------------------------------------


@dataclass
class AuditViolation:
    lower: Site
    upper: Site
    value_lower: float
    value_upper: float
    t: int | None = None

    @property
    def amount(self) -> float:
        return self.value_lower - self.value_upper

    def to_dict(self) -> dict:
        d = {"x": list(self.lower), "y": list(self.upper), "value_x": self.value_lower,
             "value_y": self.value_upper, "excess": self.amount}
        if self.t is not None:
            d["t"] = self.t
        return d


def audit_escape_monotonicity(grid: ScalarGrid, box: BoxGeometry, tol: float) -> tuple[int, list[AuditViolation]]:
    """Check p(x) <= p(y) + tol for all interior x <= y in the nonnegative orthant.

    Returns the number of pairs examined and the violations.
    """
    sites = box.orthant_interior_sites()
    checked = 0
    bad = []
    for x in sites:
        for y in sites:
            if x == y or not leq_partial(x, y):
                continue
            checked += 1
            px, py = grid[x], grid[y]
            if px > py + tol:
                bad.append(AuditViolation(x, y, px, py))
    return checked, bad


def audit_cdf_dominance(
    cdf: np.ndarray, box: BoxGeometry, pairs: Sequence[tuple[Site, Site]], tol: float
) -> list[AuditViolation]:
    """For each (x, y), require P(tau^y <= t) >= P(tau^x <= t) - tol at every t."""
    bad = []
    for x, y in pairs:
        fx = cdf_at(cdf, box, x)
        fy = cdf_at(cdf, box, y)
        gap = fx - fy
        worst = int(np.argmax(gap))
        if gap[worst] > tol:
            bad.append(AuditViolation(x, y, float(fx[worst]), float(fy[worst]), t=worst))
    return bad


def orthant_pairs(box: BoxGeometry) -> list[tuple[Site, Site]]:
    sites = box.orthant_interior_sites()
    return [(x, y) for x in sites for y in sites if x != y and leq_partial(x, y)]
