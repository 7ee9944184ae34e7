import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinsplit.basis import (PolyBasis, PropertyPChecker, PropertyPParams, check_property_P,
                            eval_basis, eval_dual, from_monomials, monomial, preset, radial_power)
from kinsplit.errors import TailUnbounded

K3 = preset("1d-k3")
GUARD = PropertyPParams(1.2, 1.05, 0.5, 0.7)


class TestBasis:
    def test_presets(self):
        assert K3.k == 3 and K3.m0 == 2 and K3.e0_indices == (0, 1, 2)
        k5 = preset("1d-k5")
        assert k5.k == 5 and k5.m0 == 4 and k5.e0_indices == (0, 1, 2)
        e3 = preset("3d-euler")
        assert e3.d == 3 and e3.k == 5 and e3.e0_indices == (0, 1, 2, 3, 4)
        with pytest.raises(KeyError):
            preset("2d-nothing")

    def test_eval_1d(self):
        np.testing.assert_array_equal(eval_basis(K3, 0.0), [1, 0, 0])
        np.testing.assert_array_equal(eval_basis(K3, 2.0), [1, 2, 4])

    def test_eval_2d(self):
        b = from_monomials(2, [(0, 0), (1, 0), (0, 1), (2, 0)])
        np.testing.assert_array_equal(eval_basis(b, [1.0, 1.0]), [1, 1, 1, 2])

    def test_radial_power_expansion(self):
        assert dict((a, c) for c, a in radial_power(2, 4)) == {(0, 4): 1.0, (2, 2): 2.0, (4, 0): 1.0}
        with pytest.raises(ValueError):
            radial_power(1, 3)

    def test_validation(self):
        with pytest.raises(ValueError, match="constant"):
            PolyBasis(1, (monomial(1), monomial(2)), 2)
        with pytest.raises(ValueError, match="exceed"):
            PolyBasis(1, (monomial(0), monomial(3), monomial(2)), 2)
        with pytest.raises(ValueError, match="dependent"):
            PolyBasis(1, (monomial(0), ((2.0, (0,)),), monomial(2)), 2)

    def test_subbasis(self):
        sub = preset("1d-k5").subbasis()
        assert sub.k == 3 and sub.m0 == 2

    def test_wrong_point_dimension(self):
        with pytest.raises(ValueError):
            eval_basis(preset("3d-euler"), np.zeros((4, 2)))


class TestEvalDual:
    def test_unit_vector(self):
        v = np.linspace(-3, 3, 7)
        np.testing.assert_array_equal(eval_dual(K3, [1, 0, 0], v), np.ones(7))

    def test_reference_state(self):
        assert eval_dual(K3, [-1, 0, 1], 0.5) == -0.75

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            eval_dual(K3, [1, 2], 0.0)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=3, max_size=3),
           st.lists(st.floats(-5, 5), min_size=3, max_size=3))
    def test_linearity(self, g1, g2):
        v = np.random.default_rng(0).uniform(-2, 2, 10)
        lhs = eval_dual(K3, np.add(g1, g2), v)
        rhs = eval_dual(K3, g1, v) + eval_dual(K3, g2, v)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


class TestPropertyP:
    def test_reference_state_holds(self):
        rep = check_property_P(K3, [-1, 0, 1], GUARD)
        assert rep.holds and rep.tail_certified
        # core maximum of v^2 - 1 on B_{0.5}(0) is -0.75
        assert rep.margins[2] == pytest.approx(-0.7 + 0.75, abs=1e-12)
        # min of v^2 - 1 on B_R is -1
        assert rep.margins[1] == pytest.approx(0.05, abs=1e-12)
        np.testing.assert_array_equal(rep.best_center, [0.0])

    def test_core_condition_fails(self):
        rep = check_property_P(K3, [-1, 0, 1], PropertyPParams(1.2, 1.05, 0.5, 0.8))
        assert not rep.holds
        assert rep.margins[2] == pytest.approx(-0.05, abs=1e-12)

    def test_positive_constant_fails_core(self):
        rep = check_property_P(K3, [1, 0, 0], GUARD)
        assert not rep.holds and rep.margins[2] < 0

    def test_negative_top_raises(self):
        with pytest.raises(TailUnbounded):
            check_property_P(K3, [-1, 0, -0.1], GUARD)

    def test_tail_failure(self):
        # v^2 - 2 is negative just outside B_1.2
        rep = check_property_P(K3, [-2, 0, 1], GUARD)
        assert not rep.holds and rep.margins[0] < 0

    def test_batch_matches_single(self):
        g = np.array([[-1, 0, 1], [-1, 0.1, 1.1], [1, 0, 0]])
        chk = PropertyPChecker(K3, GUARD)
        batch = chk(g)
        for i in range(3):
            one = chk(g[i])
            assert one.holds == batch.holds[i]
            np.testing.assert_allclose(one.margins, batch.margins[i])

    def test_density_floor(self):
        with pytest.raises(ValueError):
            PropertyPChecker(K3, GUARD, sample_density=2)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            PropertyPParams(0.5, 1.0, 0.5, 0.1)
        with pytest.raises(ValueError):
            PropertyPParams(1.0, -1.0, 0.5, 0.1)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.0, 0.75), st.floats(0.0, 0.75))
    def test_monotone_in_delta2(self, a, b):
        # with a fixed centre grid, a larger delta2 can only make the core condition harder
        lo, hi = sorted((a, b))
        mk = lambda d2: PropertyPParams(1.2, 1.05, 0.5, d2 + 1e-3, center_search_grid=((0.0,),))
        g = [-1, 0, 1]
        assert check_property_P(K3, g, mk(hi)).margins[2] <= check_property_P(K3, g, mk(lo)).margins[2]

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-0.05, 0.05), st.floats(-0.05, 0.05), st.floats(-0.05, 0.05))
    def test_small_perturbations_keep_property(self, a, b, c):
        assert check_property_P(K3, [-1 + a, b, 1 + c], PropertyPParams(1.2, 1.2, 0.5, 0.6)).holds
