import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from brwlab.offspring import (
    NegativeProbability,
    NotNormalized,
    OffspringLaw,
    bernoulli_sum_law,
    point_mass,
    validate,
)
from brwlab.rng import replica_rng
from brwlab.stats import dkw_epsilon

LAW_B = OffspringLaw((0.5, 0.0, 0.5))


def enumerate_bernoulli_sum(lam, N):
    """Reference law of a sum of four Bernoulli(sqrt(lam/N)) variables by brute force."""
    p = math.sqrt(lam / N)
    probs = [0.0] * 5
    for bits in itertools.product((0, 1), repeat=4):
        w = 1.0
        for b in bits:
            w *= p if b else 1 - p
        probs[sum(bits)] += w
    return probs


@st.composite
def laws(draw):
    w = draw(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6).filter(lambda v: sum(v) > 1e-3))
    total = math.fsum(w)
    return OffspringLaw(tuple(x / total for x in w))


class TestValidation:
    def test_accepts(self):
        assert validate([0.5, 0, 0.5]).mean() == 1.0
        assert OffspringLaw((1.0,), 0.3).survival == 0.3

    def test_not_normalized(self):
        with pytest.raises(NotNormalized):
            OffspringLaw((0.5, 0.6))

    def test_negative(self):
        with pytest.raises(NegativeProbability):
            OffspringLaw((1.5, -0.5))

    def test_trailing_zeros_stripped(self):
        assert OffspringLaw((0.5, 0.5, 0.0, 0.0)).max_offspring == 1


class TestMoments:
    def test_pgf_examples(self):
        assert LAW_B.pgf(1.0) == 1.0
        assert LAW_B.pgf(0.0) == 0.5
        assert LAW_B.pgf(0.5) == pytest.approx(0.625)

    def test_means(self):
        assert LAW_B.mean() == 1.0
        assert OffspringLaw((0.25, 0.25, 0.5)).mean() == 1.25
        assert point_mass(3).mean() == 3.0

    @given(laws())
    def test_pgf_derivative_is_mean(self, law):
        h = 1e-6
        slope = (law.pgf(1.0) - law.pgf(1.0 - h)) / h
        assert slope == pytest.approx(law.mean(), abs=1e-4 * (1 + law.max_offspring**2))

    @given(laws(), st.floats(0.0, 1.0))
    def test_pgf_vectorised(self, law, s):
        assert law.pgf(np.array([s]))[0] == pytest.approx(law.pgf(s))

    def test_pgf_range(self):
        with pytest.raises(ValueError):
            LAW_B.pgf(1.5)


class TestSampling:
    def test_point_mass(self):
        rng = replica_rng(1, 0)
        assert set(point_mass(2).sample_many(rng, 100).tolist()) == {2}

    def test_mean_clt(self):
        draws = LAW_B.sample_many(replica_rng(7, 0), 10**6)
        sd = math.sqrt(LAW_B.variance() / draws.size)
        assert abs(draws.mean() - 1.0) <= 3 * sd

    def test_deterministic(self):
        a = LAW_B.sample_many(replica_rng(3, 5), 50)
        b = LAW_B.sample_many(replica_rng(3, 5), 50)
        assert np.array_equal(a, b)

    def test_inverse_cdf_within_dkw(self):
        law = OffspringLaw((0.2, 0.3, 0.1, 0.4))
        m = 20000
        draws = np.array([law.sample(replica_rng(11, 0)) for _ in range(1)] +
                         law.sample_many(replica_rng(11, 1), m - 1).tolist())
        emp = np.array([(draws <= k).mean() for k in range(4)])
        assert np.max(np.abs(emp - np.cumsum(law.probs))) <= dkw_epsilon(m, 0.001)

    @settings(max_examples=20, deadline=None)
    @given(laws(), st.integers(0, 50))
    def test_total_offspring_matches_individual(self, law, parents):
        rng = replica_rng(parents, 1)
        totals = law.total_offspring(rng, np.full(2000, parents))
        assert totals.mean() == pytest.approx(parents * law.mean(),
                                              abs=6 * math.sqrt(parents * law.variance() / 2000) + 1e-9)


class TestBernoulliSum:
    def test_zero_mass(self):
        law = bernoulli_sum_law(1.0, 100)
        assert law.probs[0] == pytest.approx(0.6561, abs=1e-15)
        assert law.survival == pytest.approx(0.994987, abs=1e-6)

    @pytest.mark.parametrize("lam,N", [(1.0, 100), (0.2, 20), (0.2, 80), (3.0, 7)])
    def test_matches_enumeration(self, lam, N):
        law = bernoulli_sum_law(lam, N)
        assert law.probs == pytest.approx(enumerate_bernoulli_sum(lam, N), abs=1e-15)
        assert math.fsum(law.probs) == pytest.approx(1.0, abs=1e-12)

    def test_rejects(self):
        with pytest.raises(ValueError):
            bernoulli_sum_law(5.0, 4)
