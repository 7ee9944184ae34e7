import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinsplit.basis import eval_basis, preset
from kinsplit.dual_field import DualField, XGrid, transport
from kinsplit.entropy import EntropyParams, weight
from kinsplit.errors import DegenerateWeight
from kinsplit.projection import (Projector, conservation_residual, gram_system, project_field,
                                 project_point, project_samples)
from kinsplit.vquad import build_quadrature

K3 = preset("1d-k3")
K5 = preset("1d-k5")
P = EntropyParams(9 / 8, 8.0)
Q = build_quadrature(1, 1.8, 16, 6)
LBAR = np.array([-1.0, 0.0, 1.0])
LV = eval_basis(K3, Q.nodes)
W_REF = weight(LV @ LBAR, P)


def weighted_orthogonal_cubic():
    """v^3 with its weighted projection onto {1, v, v^2} removed (Gram-Schmidt)."""
    z = Q.v**3
    G = (LV * (W_REF * Q.weights)[:, None]).T @ LV
    b = LV.T @ (z * W_REF * Q.weights)
    return z - LV @ np.linalg.solve(G, b)


def test_idempotent_on_range(rng):
    for _ in range(5):
        g = LBAR + 0.05 * rng.normal(size=3)
        got = project_point(LV @ g, W_REF, K3, Q)
        np.testing.assert_allclose(got, g, atol=1e-10)


def test_orthogonal_component_discarded():
    z = weighted_orthogonal_cubic()
    # the oracle really is orthogonal to every basis element under w(lbar)
    np.testing.assert_allclose(LV.T @ (z * W_REF * Q.weights), 0, atol=1e-14)
    got = project_point(LV @ LBAR + z, W_REF, K3, Q)
    np.testing.assert_allclose(got, LBAR, atol=1e-12)


def test_zero_weight_is_degenerate():
    with pytest.raises(DegenerateWeight) as exc:
        project_point(LV @ LBAR, np.zeros(Q.size), K3, Q)
    assert exc.value.index == 0


def test_degenerate_point_index_reported():
    w = np.stack([W_REF, W_REF, np.zeros(Q.size)])
    with pytest.raises(DegenerateWeight) as exc:
        project_samples(np.tile(LV @ LBAR, (3, 1)), w, LV, Q)
    assert exc.value.index == 2


def test_gram_is_spd():
    gs = gram_system(np.atleast_2d(LV @ LBAR), np.atleast_2d(W_REF), LV, Q)
    assert gs.lam_min[0] > 1e-3
    np.testing.assert_allclose(gs.G[0], gs.G[0].T)


class TestFieldProjection:
    grid = XGrid(1, 1.0, 16)

    def field(self, amp=0.01):
        x = self.grid.axis
        return DualField(self.grid, K3, np.stack([-1 + amp * np.sin(2 * np.pi * x), 0 * x, 1 + 0 * x]))

    def test_zero_transport(self):
        f = self.field()
        got = project_field(transport(f, 0.0, Q), f, Q, P)
        np.testing.assert_allclose(got.coeffs, f.coeffs, atol=1e-12)

    def test_homogeneous(self):
        f = DualField.constant(self.grid, K3, [-1, 0.1, 1.05])
        got = project_field(transport(f, 0.3, Q), f, Q, P)
        np.testing.assert_allclose(got.coeffs, f.coeffs, atol=1e-12)

    def test_e0_range_fixed(self):
        # lbar in E0* of the five-term basis
        f = DualField.constant(self.grid, K5, [-1, 0.1, 1.0, 0, 0])
        pr = Projector(K5, Q, P)
        got = pr.project(f.nodal(Q), pr.weights_of(f), "e0")
        np.testing.assert_allclose(got, f.per_point, atol=1e-11)

    def test_e0_zeroes_higher_moments(self):
        f = DualField.constant(self.grid, K5, [-1, 0.0, 1.0, 0.05, 0.3])
        pr = Projector(K5, Q, P)
        got = pr.project(f.nodal(Q), pr.weights_of(f), "e0")
        np.testing.assert_array_equal(got[:, 3:], 0)

    def test_unknown_subspace(self):
        with pytest.raises(ValueError):
            Projector(K3, Q, P)._columns("nope")

    def test_conservation(self):
        f = self.field(0.05)
        tgt = transport(f, 0.05, Q).values
        pr = Projector(K3, Q, P)
        w = pr.weights_of(f)
        new = pr.project(tgt, w) @ LV.T
        assert conservation_residual(new, tgt, w, LV, Q).max() < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-0.1, 0.1), min_size=3, max_size=3),
       st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_best_approximation(dg, coef):
    """The projection beats any other element of E* in the weighted norm."""
    g = LBAR + np.asarray(dg)
    w = weight(LV @ g, P)
    target = LV @ g + 0.2 * weighted_orthogonal_cubic() + 0.05 * Q.v**4
    pg = project_point(target, w, K3, Q)
    err = lambda c: np.sum((target - LV @ c) ** 2 * w * Q.weights)
    assert err(pg) <= err(pg + 1e-3 * np.asarray(coef)) + 1e-15


def test_preconditioned_matches_plain():
    b = preset("3d-euler")
    q = build_quadrature(3, 1.8, 4, 4)
    lv = eval_basis(b, q.nodes)
    ref = np.array([-1.0, 0, 0, 0, 1.0])
    w = weight(lv @ ref, P)
    tgt = lv @ (ref + np.array([0.01, 0.02, -0.01, 0.0, 0.03])) + 0.01 * q.nodes[:, 0] ** 3
    pr = Projector(b, q, P, reference=ref)
    assert pr.precond is not None
    got = pr.project(tgt[None], w[None])[0]
    plain, _ = project_samples(tgt[None], w[None], lv, q)
    np.testing.assert_allclose(got, plain[0], atol=1e-10)
