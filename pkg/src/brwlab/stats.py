"""Turning replica outputs into dominance verdicts and confidence statements."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats as sps

MIN_DOMINANCE_SAMPLES = 100


class InsufficientSamples(ValueError):
    pass


class DegenerateBinning(ValueError):
    pass


@dataclass
class EmpiricalSample:
    """Observed values plus the number of censored runs.

    Censored runs are known only to exceed the observation window; they count
    towards the sample size but never enter the step function.
    """

    values: np.ndarray
    censor_count: int = 0

    @classmethod
    def of(cls, values: Iterable[float], censor_count: int = 0) -> "EmpiricalSample":
        return cls(np.asarray(list(values), dtype=float), int(censor_count))

    @property
    def size(self) -> int:
        return int(self.values.size) + self.censor_count


class ECDF:
    """Right-continuous empirical distribution function."""

    def __init__(self, sample: EmpiricalSample | Sequence[float]):
        if not isinstance(sample, EmpiricalSample):
            sample = EmpiricalSample.of(sample)
        if sample.size == 0:
            raise ValueError("empirical CDF of an empty sample")
        self.sample = sample
        self._sorted = np.sort(sample.values)
        self.n = sample.size
        self.support = np.unique(self._sorted[np.isfinite(self._sorted)])

    def __call__(self, t):
        return np.searchsorted(self._sorted, t, side="right") / self.n


def ecdf(sample) -> ECDF:
    return ECDF(sample)


def dkw_epsilon(m: int, alpha: float) -> float:
    """Half-width of the two-sided DKW band for a sample of size m."""
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * m))


class Status(str, Enum):
    CONSISTENT = "Consistent"
    VIOLATED = "Violated"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class DominanceVerdict:
    claim: str
    status: Status
    max_violation: float
    band: float
    alpha: float
    m_x: int
    m_y: int
    worst_t: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["status"] = self.status.value
        return d


def dominance_test(
    sample_x,
    sample_y,
    alpha: float = 0.01,
    claim: str = "Y <=st X",
    horizon: float | None = None,
) -> DominanceVerdict:
    """Test Y <=st X, i.e. F_Y(t) >= F_X(t) for every t.

    The statistic is max_t (F_X(t) - F_Y(t)) over the pooled observed support
    (restricted to t <= horizon when given).  It is compared with the sum of
    the two DKW half-widths.
    """
    fx, fy = ECDF(sample_x), ECDF(sample_y)
    if fx.n < MIN_DOMINANCE_SAMPLES or fy.n < MIN_DOMINANCE_SAMPLES:
        raise InsufficientSamples(f"need at least {MIN_DOMINANCE_SAMPLES} samples, got {fx.n} and {fy.n}")
    pts = np.union1d(fx.support, fy.support)
    if horizon is not None:
        pts = pts[pts <= horizon]
    if pts.size:
        gap = fx(pts) - fy(pts)
        i = int(np.argmax(gap))
        worst, worst_t = float(gap[i]), float(pts[i])
    else:
        worst, worst_t = 0.0, None
    band = dkw_epsilon(fx.n, alpha) + dkw_epsilon(fy.n, alpha)
    if worst <= 0.0:
        status = Status.CONSISTENT
    elif worst <= band:
        status = Status.INCONCLUSIVE
    else:
        status = Status.VIOLATED
    return DominanceVerdict(claim, status, worst, band, alpha, fx.n, fy.n, worst_t)


def wilson_interval(successes: int, trials: int, alpha: float = 0.01) -> tuple[float, float]:
    if trials < 1:
        raise ValueError("need at least one trial")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    z = sps.norm.ppf(1.0 - alpha / 2.0)
    p = successes / trials
    z2n = z * z / trials
    centre = (p + z2n / 2.0) / (1.0 + z2n)
    half = z / (1.0 + z2n) * math.sqrt(p * (1.0 - p) / trials + z2n / (4.0 * trials))
    return float(max(0.0, centre - half)), float(min(1.0, centre + half))


def estimate_prob(successes: int, trials: int, alpha: float = 0.01) -> tuple[float, tuple[float, float]]:
    return successes / trials, wilson_interval(successes, trials, alpha)


@dataclass
class MarginalVerdict:
    passed: bool
    pvalue: float
    statistic: float
    dof: int
    alpha: float
    bins: list
    m_a: int
    m_b: int

    def to_dict(self) -> dict:
        return asdict(self)


def _merge_bins(table: np.ndarray, edges: list, min_expected: float) -> tuple[np.ndarray, list]:
    rows = table.sum(axis=1)
    total = rows.sum()
    floor = rows.min() / total
    cols, labels = [], []
    acc = np.zeros(2, dtype=np.int64)
    start = None
    for j in range(table.shape[1]):
        if start is None:
            start = edges[j]
        acc = acc + table[:, j]
        if acc.sum() * floor >= min_expected:
            cols.append(acc)
            labels.append([start, edges[j]])
            acc = np.zeros(2, dtype=np.int64)
            start = None
    if start is not None:
        if not cols:
            cols.append(acc)
            labels.append([start, edges[-1]])
        else:
            cols[-1] = cols[-1] + acc
            labels[-1][1] = edges[-1]
    return np.array(cols).T, labels


def two_sample_marginal_test(sample_a, sample_b, alpha: float = 0.01, min_expected: float = 5.0) -> MarginalVerdict:
    """Chi-square homogeneity of two discrete samples.

    Values are binned on their pooled support; adjacent bins (in value order)
    are merged until every expected cell count is at least ``min_expected``.
    """
    a = np.asarray(sample_a)
    b = np.asarray(sample_b)
    if a.size == 0 or b.size == 0:
        raise DegenerateBinning("empty sample")
    support = np.union1d(a, b)
    table = np.vstack([
        np.searchsorted(np.sort(a), support, side="right") - np.searchsorted(np.sort(a), support, side="left"),
        np.searchsorted(np.sort(b), support, side="right") - np.searchsorted(np.sort(b), support, side="left"),
    ]).astype(np.int64)
    merged, labels = _merge_bins(table, [float(v) for v in support], min_expected)
    if merged.shape[1] < 2:
        raise DegenerateBinning("fewer than two bins after merging")
    stat, pvalue, dof, _ = sps.chi2_contingency(merged, correction=False)
    return MarginalVerdict(bool(pvalue >= alpha), float(pvalue), float(stat), int(dof), alpha,
                           labels, int(a.size), int(b.size))


def with_rerun(trial: Callable[[int], bool], seeds: Sequence[int]) -> tuple[bool, int]:
    """Run a statistical check on successive independent seeds until one passes.

    Returns (passed, attempts).  With a per-run false-alarm rate a and two
    seeds the overall false-alarm rate is a^2.
    """
    attempts = 0
    for s in seeds:
        attempts += 1
        if trial(s):
            return True, attempts
    return False, attempts
