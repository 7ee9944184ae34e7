from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize

from kinsplit.entropy import (EntropyParams, W_antideriv, density_from_dual, s_primal, s_star,
                              weight, weight_derivative)

P = EntropyParams(9 / 8, 8.0)
admissible_p = st.floats(1.01, 1.19)


def test_defaults_and_exponents():
    p = EntropyParams()
    assert p.p == 9 / 8
    assert p.c_bar == pytest.approx(8.0)
    assert p.q == 7.0
    assert p.q + 1 == pytest.approx(1 / (p.p - 1))


@pytest.mark.parametrize("p", [1.0, 1.2, 1.5, 0.9])
def test_p_outside_range_rejected(p):
    with pytest.raises(ValueError):
        EntropyParams(p)


def test_nonpositive_c_bar_rejected():
    with pytest.raises(ValueError):
        EntropyParams(9 / 8, 0.0)


class TestPrimal:
    def test_zero_and_one(self):
        assert s_primal(0.0, P) == 0.0
        for p in (1.05, 1.1, 1.19):
            assert s_primal(1.0, EntropyParams(p)) == 1.0

    def test_two(self):
        assert s_primal(2.0, P) == pytest.approx(np.exp(9 / 8 * np.log(2.0)), rel=1e-15)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            s_primal(-0.1, P)


class TestLegendre:
    def test_c_p_exact(self):
        exact = Fraction(1, 8) / Fraction(9, 8) ** 9
        assert P.c_p == pytest.approx(float(exact), rel=1e-14)
        assert s_star(1.0, P) == pytest.approx(float(exact), rel=1e-14)
        assert s_star(2.0, P) == pytest.approx(float(exact * 512), rel=1e-14)

    @pytest.mark.parametrize("l", [0.3, 1.0, 2.0])
    def test_against_numerical_sup(self, l):
        res = optimize.minimize_scalar(lambda f: -(l * f - f**P.p), bounds=(0, 1e6), method="bounded",
                                       options={"xatol": 1e-12})
        assert s_star(l, P) == pytest.approx(-res.fun, rel=1e-9)

    def test_negative_part_vanishes(self):
        assert s_star(-3.0, P) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(admissible_p, st.floats(0.05, 3.0))
    def test_fenchel_young(self, p, l):
        prm = EntropyParams(p)
        f = np.linspace(0, 10, 2001)
        assert np.all(l * f - s_primal(f, prm) <= s_star(l, prm) * (1 + 1e-12) + 1e-14)


class TestWeight:
    def test_values(self):
        assert weight(5.0, P) == 0.0
        assert weight(-1.0, P) == 8.0
        assert weight(-0.5, P) == pytest.approx(0.0625, rel=1e-15)

    def test_smooth_at_zero(self):
        # q = 7: the fourth derivative behaves like l^3 and is continuous at 0
        eps = 1e-3
        d4 = lambda l: (weight(l + 2 * eps, P) - 4 * weight(l + eps, P) + 6 * weight(l, P)
                        - 4 * weight(l - eps, P) + weight(l - 2 * eps, P)) / eps**4
        assert abs(d4(-1e-2)) < 0.1 and abs(d4(1e-2)) < 0.1

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-3, 3))
    def test_derivative_matches_fd(self, l):
        eps = 1e-6
        fd = (weight(l + eps, P) - weight(l - eps, P)) / (2 * eps)
        assert weight_derivative(l, P) == pytest.approx(fd, rel=1e-6, abs=1e-6)


class TestAntiderivative:
    def test_values(self):
        assert W_antideriv(0.0, P) == 0.0
        assert W_antideriv(1.0, P) == 0.0
        assert W_antideriv(-1.0, P) == pytest.approx(-1.0, rel=1e-15)

    @pytest.mark.parametrize("l", [-1.0, -0.3, -2.0])
    def test_integral_of_weight(self, l):
        val, _ = integrate.quad(lambda s: weight(s, P), 0.0, l, epsabs=1e-14, epsrel=1e-13)
        assert W_antideriv(l, P) == pytest.approx(val, rel=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(admissible_p, st.floats(-3, 3))
    def test_derivative_is_weight(self, p, l):
        prm = EntropyParams(p)
        eps = 1e-6
        fd = (W_antideriv(l + eps, prm) - W_antideriv(l - eps, prm)) / (2 * eps)
        assert fd == pytest.approx(weight(l, prm), rel=1e-5, abs=1e-6)

    @settings(max_examples=40, deadline=None)
    @given(admissible_p, st.floats(-3, 3))
    def test_nonpositive(self, p, l):
        assert W_antideriv(l, EntropyParams(p)) <= 0.0


class TestDensity:
    def test_values(self):
        assert density_from_dual(2.0, P) == 0.0
        assert density_from_dual(-1.0, P) == pytest.approx(1.0)

    def test_proportional_to_legendre_derivative(self):
        l = -np.linspace(0.1, 3, 40)
        eps = 1e-6
        ds = (s_star(-l + eps, P) - s_star(-l - eps, P)) / (2 * eps)
        ratio = density_from_dual(l, P) / ds
        assert np.ptp(ratio) < 1e-6 * np.abs(ratio).mean()

    def test_broadcasting(self):
        out = density_from_dual(np.zeros((3, 4)) - 1, P)
        assert out.shape == (3, 4)
