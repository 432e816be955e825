"""Hypercube geometry, the coordinatewise partial order and the reflection maps.

Sites are plain integer tuples.  The three reflections used by the couplings
are provided both for single sites and vectorised over ``(m, 2)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

Site = tuple[int, ...]


class DimensionMismatch(ValueError):
    pass


class KernelKind(str, Enum):
    LAZY = "lazy"
    STRICT = "strict"
    GENERALIZED = "generalized"


class Half(str, Enum):
    NEAR = "near"
    FAR = "far"
    OUTSIDE = "outside"


class Axis(str, Enum):
    """Symmetry axes of the three couplings.

    ``V_HALF`` is the vertical line x = 1/2, ``V_ONE`` the lattice line x = 1
    and ``DIAG_ONE`` the anti-diagonal x + y = 1.
    """

    V_HALF = "x=1/2"
    V_ONE = "x=1"
    DIAG_ONE = "x+y=1"


def _check_dims(x: Sequence[int], d: int) -> None:
    if len(x) != d:
        raise DimensionMismatch(f"site {tuple(x)} has dimension {len(x)}, expected {d}")


def sup_norm(x: Sequence[int]) -> int:
    return max(abs(int(c)) for c in x)


@dataclass(frozen=True)
class BoxGeometry:
    """The box {x : |x|_inf <= n} in Z^d."""

    d: int
    n: int

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise ValueError(f"invalid geometry d={self.d}, n={self.n}")

    def contains(self, x: Sequence[int]) -> bool:
        _check_dims(x, self.d)
        return sup_norm(x) <= self.n

    def boundary_contains(self, x: Sequence[int]) -> bool:
        _check_dims(x, self.d)
        return sup_norm(x) == self.n

    def interior_contains(self, x: Sequence[int]) -> bool:
        _check_dims(x, self.d)
        return sup_norm(x) < self.n

    def sites(self) -> Iterator[Site]:
        """All sites of the box in lexicographic order."""
        rng = range(-self.n, self.n + 1)
        for idx in np.ndindex(*([len(rng)] * self.d)):
            yield tuple(int(i) - self.n for i in idx)

    def interior_sites(self) -> Iterator[Site]:
        return (x for x in self.sites() if sup_norm(x) < self.n)

    def orthant_interior_sites(self) -> list[Site]:
        """Interior sites with all coordinates >= 0."""
        return [x for x in self.interior_sites() if min(x) >= 0]

    def index(self, x: Sequence[int]) -> tuple[int, ...]:
        """Array index of ``x`` in a grid of shape ``(2n+1,) * d``."""
        return tuple(int(c) + self.n for c in x)

    @property
    def shape(self) -> tuple[int, ...]:
        return (2 * self.n + 1,) * self.d

    # -- two-dimensional helpers ------------------------------------------------

    def punctured_contains(self, x: Sequence[int]) -> bool:
        """Membership in the side-(2n-1) box centred at (1/2, 1/2) minus its corners."""
        self._require_planar(x)
        lo, hi = -self.n + 1, self.n
        px, py = int(x[0]), int(x[1])
        if not (lo <= px <= hi and lo <= py <= hi):
            return False
        return (px, py) not in self.punctured_corners()

    def punctured_corners(self) -> tuple[Site, ...]:
        n = self.n
        return ((-n + 1, -n + 1), (-n + 1, n), (n, n), (n, -n + 1))

    def punctured_boundary_contains(self, x: Sequence[int]) -> bool:
        if not self.punctured_contains(x):
            return False
        lo, hi = -self.n + 1, self.n
        return int(x[0]) in (lo, hi) or int(x[1]) in (lo, hi)

    def boundary_side(self, x: Sequence[int], punctured: bool = False) -> frozenset[str]:
        """Sides (subset of N, S, E, W) of the boundary that contain ``x``.

        Corners belong to both adjacent sides.
        """
        self._require_planar(x)
        px, py = int(x[0]), int(x[1])
        if punctured:
            if not self.punctured_boundary_contains(x):
                raise ValueError(f"{tuple(x)} is not on the punctured boundary for n={self.n}")
            lo, hi = -self.n + 1, self.n
        else:
            if not self.boundary_contains(x):
                raise ValueError(f"{tuple(x)} is not on the boundary for n={self.n}")
            lo, hi = -self.n, self.n
        sides = set()
        if py == hi:
            sides.add("N")
        if py == lo:
            sides.add("S")
        if px == hi:
            sides.add("E")
        if px == lo:
            sides.add("W")
        return frozenset(sides)

    def side_sites(self, side: str, punctured: bool = False) -> list[Site]:
        pred = self.punctured_boundary_contains if punctured else self.boundary_contains
        rng = range(-self.n, self.n + 1)
        out = []
        for px in rng:
            for py in rng:
                if pred((px, py)) and side in self.boundary_side((px, py), punctured):
                    out.append((px, py))
        return out

    def _require_planar(self, x: Sequence[int]) -> None:
        if self.d != 2:
            raise DimensionMismatch("punctured box and sides are defined for d = 2 only")
        _check_dims(x, 2)


def leq_partial(x: Sequence[int], y: Sequence[int]) -> bool:
    """Coordinatewise order: x_i <= y_i for every i."""
    if len(x) != len(y):
        raise DimensionMismatch(f"cannot compare {tuple(x)} and {tuple(y)}")
    return all(a <= b for a, b in zip(x, y))


def comparable_pairs(sites: Sequence[Site]) -> list[tuple[Site, Site]]:
    """All ordered pairs (x, y) with x <= y, x != y."""
    return [(x, y) for x in sites for y in sites if x != y and leq_partial(x, y)]


# -- reflections -----------------------------------------------------------------


def reflect_phi(x: Sequence[int]) -> Site:
    """Mirror across x = 1/2."""
    return (-int(x[0]) + 1, int(x[1]))


def reflect_psi(x: Sequence[int]) -> Site:
    """Mirror across x = 1."""
    return (-int(x[0]) + 2, int(x[1]))


def reflect_upsilon(x: Sequence[int]) -> Site:
    """Mirror across the anti-diagonal y = 1 - x."""
    return (1 - int(x[1]), 1 - int(x[0]))


def reflect_array(axis: Axis, coords: np.ndarray) -> np.ndarray:
    """Vectorised reflection of an ``(m, 2)`` coordinate array."""
    out = np.empty_like(coords)
    if axis is Axis.V_HALF:
        out[:, 0] = 1 - coords[:, 0]
        out[:, 1] = coords[:, 1]
    elif axis is Axis.V_ONE:
        out[:, 0] = 2 - coords[:, 0]
        out[:, 1] = coords[:, 1]
    else:
        out[:, 0] = 1 - coords[:, 1]
        out[:, 1] = 1 - coords[:, 0]
    return out


def reflect(axis: Axis, x: Sequence[int]) -> Site:
    return {Axis.V_HALF: reflect_phi, Axis.V_ONE: reflect_psi, Axis.DIAG_ONE: reflect_upsilon}[axis](x)


def _axis_offset(axis: Axis, coords: np.ndarray) -> np.ndarray:
    # signed position relative to the axis; near side <= -1/2 or -1, far side >= 1/2 or 1
    if axis is Axis.V_HALF:
        return 2 * coords[:, 0] - 1
    if axis is Axis.V_ONE:
        return coords[:, 0] - 1
    return coords[:, 0] + coords[:, 1] - 1


def classify_array(axis: Axis, coords: np.ndarray) -> np.ndarray:
    """-1 for the near half, +1 for the far half, 0 on the axis line (unbounded halves)."""
    return np.sign(_axis_offset(axis, np.asarray(coords, dtype=np.int64)))


def classify_half(axis: Axis, x: Sequence[int], n: int | None = None) -> Half:
    """Which half of the coupling's mirror pair the site lies in.

    With ``n`` given the halves are the bounded strips used for the box of
    radius ``n`` (for the diagonal axis, intersected with the punctured box);
    without it they are the full half-planes.  Sites on the axis line itself
    belong to neither half.
    """
    _check_dims(x, 2)
    px, py = int(x[0]), int(x[1])
    s = int(classify_array(axis, np.array([[px, py]]))[0])
    if s == 0:
        return Half.OUTSIDE
    if n is not None:
        if axis is Axis.V_HALF and not (-n + 1 <= px <= n):
            return Half.OUTSIDE
        if axis is Axis.V_ONE and not (-n + 2 <= px <= n):
            return Half.OUTSIDE
        if axis is Axis.DIAG_ONE and not BoxGeometry(2, n).punctured_contains((px, py)):
            return Half.OUTSIDE
    return Half.NEAR if s < 0 else Half.FAR


# -- neighbourhoods --------------------------------------------------------------


def unit_moves(d: int, kind: KernelKind) -> np.ndarray:
    """Displacements in the fixed order: (self,) +e1, -e1, +e2, -e2, ..."""
    rows = []
    if kind is KernelKind.LAZY:
        rows.append([0] * d)
    for i in range(d):
        for sign in (1, -1):
            v = [0] * d
            v[i] = sign
            rows.append(v)
    return np.array(rows, dtype=np.int64)


def neighbors(x: Sequence[int], kind: KernelKind) -> list[Site]:
    moves = unit_moves(len(x), KernelKind(kind))
    return [tuple(int(a + b) for a, b in zip(x, m)) for m in moves]
