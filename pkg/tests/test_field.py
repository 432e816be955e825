import numpy as np
import pytest
from hypothesis import given, strategies as st

from brwlab.field import ParticleField, aggregate, codec

sites = st.lists(st.tuples(st.integers(-1000, 1000), st.integers(-1000, 1000)), min_size=1, max_size=30)


class TestCodec:
    @given(sites)
    def test_roundtrip_and_order(self, xs):
        c = codec(2)
        arr = np.array(xs, dtype=np.int64)
        keys = c.encode(arr)
        assert np.array_equal(c.decode(keys), arr)
        by_key = [xs[i] for i in np.argsort(keys, kind="stable")]
        assert by_key == sorted(xs)

    def test_overflow(self):
        with pytest.raises(OverflowError):
            codec(3).encode(np.array([[1 << 30, 0, 0]]))


class TestAggregate:
    def test_merges_and_drops(self):
        k, c = aggregate(np.array([5, 3, 5, 7]), np.array([1, 2, 3, 0]))
        assert k.tolist() == [3, 5] and c.tolist() == [2, 4]

    def test_empty(self):
        k, c = aggregate(np.array([1]), np.array([0]))
        assert k.size == 0 and c.size == 0


class TestParticleField:
    @given(st.dictionaries(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), st.integers(1, 9), min_size=1))
    def test_dict_roundtrip(self, mapping):
        f = ParticleField.from_dict(mapping)
        assert f.to_dict() == mapping
        assert f.total == sum(mapping.values())
        for s, v in mapping.items():
            assert f.get(s) == v

    def test_counts_at_missing(self):
        f = ParticleField.single((1, 2), 3)
        assert f.counts_at([(1, 2), (0, 0), (5, 5)]).tolist() == [3, 0, 0]
        assert ParticleField.empty(2).counts_at([(0, 0)]).tolist() == [0]

    def test_add(self):
        f = ParticleField.single((0, 0)) + ParticleField.from_dict({(0, 0): 2, (1, 0): 1})
        assert f.to_dict() == {(0, 0): 3, (1, 0): 1}

    def test_equality(self):
        assert ParticleField.from_dict({(0, 0): 1, (1, 1): 2}) == ParticleField.from_dict({(1, 1): 2, (0, 0): 1})
        assert ParticleField.empty(2) != ParticleField.single((0, 0))

    def test_no_zero_counts(self):
        f = ParticleField.from_coords([[0, 0], [1, 1]], [0, 4])
        assert f.to_dict() == {(1, 1): 4}

    def test_empty_dict_needs_dimension(self):
        with pytest.raises(ValueError):
            ParticleField.from_dict({})
        assert ParticleField.from_dict({}, d=3).is_empty
