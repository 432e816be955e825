import numpy as np
import pytest

from brwlab.coupling import (
    SPECS,
    CoupledState,
    CouplingKind,
    InvariantViolation,
    check_invariants,
    coupled_step,
    even_diagonal_exceptions,
    init_coupled,
    kernel_for,
    marginal_of,
    run_coupled_free,
    run_coupled_hitting,
    spec_of,
)
from brwlab.field import ParticleField
from brwlab.lattice import BoxGeometry, Half, KernelKind, classify_half, reflect
from brwlab.offspring import OffspringLaw, point_mass
from brwlab.rng import replica_rng

LAW_B = OffspringLaw((0.5, 0.0, 0.5))
KIND_LAWS = [
    (CouplingKind.AXIS_SHIFT_1, LAW_B),
    (CouplingKind.DIAG_SHIFT, LAW_B),
    (CouplingKind.AXIS_SHIFT_2, LAW_B),
    (CouplingKind.AXIS_SHIFT_2, OffspringLaw((0.5, 0.0, 0.5), 0.3)),
]


class TestTables:
    @pytest.mark.parametrize("kind", list(CouplingKind))
    def test_pairings_are_permutations(self, kind):
        spec = spec_of(kind)
        k = len(spec.moves)
        assert sorted(spec.synthetic) == list(range(k))
        assert sorted(spec.antithetic) == list(range(k))

    @pytest.mark.parametrize("kind", list(CouplingKind))
    def test_geometry(self, kind):
        """Paired children either coincide (relabelled) or are mirror images."""
        spec = spec_of(kind)
        moves = [tuple(m) for m in spec.moves.tolist()]
        for x0 in [(a, b) for a in range(-4, 5) for b in range(-4, 5)]:
            if classify_half(spec.axis, x0) is not Half.NEAR:
                continue
            x1 = reflect(spec.axis, x0)
            adj = bool(spec.adjacent(np.array([x0]))[0])
            table = spec.synthetic if adj else spec.antithetic
            for i, j in enumerate(table):
                c0 = (x0[0] + moves[i][0], x0[1] + moves[i][1])
                c1 = (x1[0] + moves[j][0], x1[1] + moves[j][1])
                if adj and spec.relabel[i]:
                    assert c0 == c1
                else:
                    assert reflect(spec.axis, c0) == c1
                    assert classify_half(spec.axis, c0) is Half.NEAR

    def test_kernels(self):
        assert kernel_for("axis1", LAW_B).kind is KernelKind.LAZY
        assert kernel_for("diag", LAW_B).kind is KernelKind.STRICT
        k = kernel_for("axis2", OffspringLaw((1.0,), 0.3))
        assert k.kind is KernelKind.GENERALIZED and k.survival == 0.3


class TestInitialState:
    def test_starts(self):
        assert init_coupled("axis1").alpha1.to_dict() == {(1, 0): 1}
        assert init_coupled("diag").alpha1.to_dict() == {(1, 1): 1}
        assert init_coupled("axis2").alpha1.to_dict() == {(2, 0): 1}
        assert marginal_of(init_coupled("axis1"), 1).to_dict() == {(1, 0): 1}

    @pytest.mark.parametrize("kind", list(CouplingKind))
    def test_invariants_at_zero(self, kind):
        assert check_invariants(init_coupled(kind)) == []


def _first_step_where(kind, law, predicate, tries=500):
    for i in range(tries):
        s = coupled_step(init_coupled(kind), law, replica_rng(99, i))
        if predicate(s):
            return s
    raise AssertionError("event never observed")


class TestRules:
    def test_axis_east_child_becomes_sigma(self):
        s = _first_step_where("axis1", point_mass(1), lambda s: marginal_of(s, 0).get((1, 0)) == 1)
        assert s.sigma0.to_dict() == {(1, 0): 1}
        assert s.sigma1 == s.sigma0
        assert s.alpha0.is_empty and s.alpha1.is_empty

    def test_diag_north_child_becomes_sigma(self):
        s = _first_step_where("diag", point_mass(1), lambda s: marginal_of(s, 0).get((0, 1)) == 1)
        assert s.sigma0.to_dict() == {(0, 1): 1} and s.sigma1 == s.sigma0

    def test_diag_west_child_stays_alpha(self):
        s = _first_step_where("diag", point_mass(1), lambda s: marginal_of(s, 0).get((-1, 0)) == 1)
        assert s.alpha0.to_dict() == {(-1, 0): 1}
        assert s.alpha1.to_dict() == {(1, 2): 1}

    def test_non_axis2_rejects_survival(self):
        with pytest.raises(ValueError):
            coupled_step(init_coupled("diag"), OffspringLaw((1.0,), 0.3), replica_rng(0, 0))

    @pytest.mark.parametrize("kind,law", KIND_LAWS)
    def test_twenty_steps(self, kind, law):
        for i in range(30):
            state = init_coupled(kind)
            for _ in range(20):
                state = coupled_step(state, law, replica_rng(5, i), cap=10**5)
                assert state.raw0.total == state.sigma0.total + state.alpha0.total


class TestViolationDetection:
    def test_sigma_mismatch(self):
        s = init_coupled("axis1")
        bad = CoupledState(s.kind, 0, ParticleField.single((5, 5)), s.alpha0, s.sigma1, s.alpha1)
        assert "sigma0 != sigma1" in check_invariants(bad)
        with pytest.raises(InvariantViolation) as err:
            coupled_step(bad, LAW_B, replica_rng(0, 0))
        assert "state" in str(err.value)

    def test_alpha_support_and_mirror(self):
        s = init_coupled("axis1")
        bad = CoupledState(s.kind, 0, s.sigma0, ParticleField.single((3, 0)), s.sigma1, s.alpha1)
        problems = check_invariants(bad)
        assert any("near half" in p for p in problems)
        assert any("mirror" in p for p in problems)

    def test_decomposition(self):
        s = init_coupled("axis1")
        bad = CoupledState(s.kind, 1, s.sigma0, s.alpha0, s.sigma1, s.alpha1,
                           raw0=ParticleField.empty(2), raw1=marginal_of(s, 1))
        assert check_invariants(bad) == ["decomposition fails on side 0"]


class TestHitting:
    @pytest.mark.parametrize("kind,law", KIND_LAWS)
    @pytest.mark.parametrize("n", [2, 3])
    def test_ordering(self, kind, law, n):
        box = BoxGeometry(2, n)
        for i in range(150):
            h = run_coupled_hitting(kind, box, law, 10 * n * n, 10**5, replica_rng(n, i))
            assert h.ordered
            assert h.S == h.S1
            assert h.identity_ok

    def test_sterile_law(self):
        h = run_coupled_hitting("axis1", BoxGeometry(2, 3), point_mass(0), 90, 100, replica_rng(0, 0))
        assert h.tau0 is None and h.tau1 is None and h.extinct0 and h.extinct1

    def test_record_at(self):
        h = run_coupled_hitting("diag", BoxGeometry(2, 1), point_mass(2), 10, 10**5, replica_rng(0, 0),
                                record_at=2)
        assert h.extra == {"pop0_at": 4, "pop1_at": 4}
        assert h.tau1 == 0 and h.tau0 == 1


class TestFree:
    def test_even_diagonal(self):
        law = OffspringLaw((0.25, 0.25, 0.5), 0.3)
        for i in range(30):
            run = run_coupled_free("axis2", law, 12, 10**5, replica_rng(1, i),
                                   observe=lambda s: even_diagonal_exceptions(s) if s.t % 2 == 0 else 0)
            assert sum(run.observations) == 0

    def test_cap_stops_run(self):
        run = run_coupled_free("axis1", point_mass(3), 50, 1000, replica_rng(0, 0))
        assert run.censored and run.steps < 50
