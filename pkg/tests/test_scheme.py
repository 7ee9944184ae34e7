import numpy as np
import pytest

from conftest import GUARD, LBAR, canonical_l0, canonical_problem
from kinsplit.basis import PropertyPParams, preset
from kinsplit.diagnostics import fit_lemma_constants
from kinsplit.dual_field import DualField, XGrid
from kinsplit.entropy import EntropyParams, weight
from kinsplit.errors import HypothesisViolation
from kinsplit.projection import Projector
from kinsplit.scheme import (Problem, SchemeConfig, interpolant_bgk, interpolant_tp, run, step_bgk,
                             step_tp)
from kinsplit.vquad import build_quadrature

K5 = preset("1d-k5")


def k5_problem(N=8):
    return Problem(EntropyParams(9 / 8, 8.0), K5, XGrid(1, 1.0, N), build_quadrature(1, 1.8, 16, 6),
                   np.array([-1.0, 0, 1, 0, 0]))


def e0_distance(state, problem):
    q = problem.quad
    pr = Projector(problem.basis, q, problem.params)
    vals = state.nodal(q)
    w = weight(vals, problem.params)
    pi = DualField.from_points(state.grid, state.basis, pr.project(vals, w, "e0")).nodal(q)
    return ((vals - pi) ** 2 * w) @ q.weights


class TestConfig:
    def test_steps(self):
        assert SchemeConfig(h=0.01, T=0.2).n_steps == 20
        assert SchemeConfig(h=0.03, T=0.2).n_steps == 7

    @pytest.mark.parametrize("kw", [dict(h=0.0), dict(h=1.5), dict(variant="bgk", h=1.0),
                                    dict(variant="other"), dict(T=0.0), dict(guard_stride=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SchemeConfig(**kw)


class TestTransportProjection:
    def test_homogeneous_fixed_point(self, problem):
        f = DualField.constant(problem.grid, problem.basis, [-1.0, 0.05, 1.02])
        np.testing.assert_allclose(step_tp(f, 0.01, problem).coeffs, f.coeffs, atol=1e-13)

    def test_zero_step(self, problem, l0):
        assert step_tp(l0, 0.0, problem) is l0

    def test_first_step(self, acceptance_runs):
        traj = acceptance_runs[0.01]
        rec0, rec1 = traj.ledger[0], traj.ledger[1]
        assert rec1["conservation_residual"] <= 1e-9
        c = fit_lemma_constants(traj.ledger, traj.h).C_energy0
        bound = rec1["X"] ** 2 + rec0["X"] ** 2
        assert rec1["D"] - rec0["D"] <= c * traj.h * bound * (1 + 1e-12)


class TestBGK:
    def test_equilibrium_fixed_point(self):
        prob = k5_problem()
        f = DualField.constant(prob.grid, K5, [-1.0, 0.1, 1.0, 0, 0])
        nxt, pi0 = step_bgk(f, 0.05, prob)
        np.testing.assert_allclose(nxt.coeffs, f.coeffs, atol=1e-12)
        np.testing.assert_allclose(pi0.coeffs, f.coeffs, atol=1e-12)

    def test_small_h_matches_plain_scheme(self, problem, l0):
        h = 1e-4
        a, _ = step_bgk(l0, h, problem)
        b = step_tp(l0, h, problem)
        assert a.sup_coeff_distance(b) <= 1e-3

    def test_relaxation_monotone(self):
        prob = k5_problem()
        f = DualField.constant(prob.grid, K5, [-1.0, 0.0, 1.0, 0.1, 0.4])
        traj = run(SchemeConfig(variant="bgk", h=0.05, T=0.25, guard=None, ledger_on=False), f, prob)
        d = [e0_distance(s, prob)[0] for s in traj.states]
        assert np.all(np.diff(d) < 0)

    def test_h_range(self, problem, l0):
        with pytest.raises(ValueError):
            step_bgk(l0, 1.0, problem)


class TestRun:
    def test_constant_trajectory(self, problem):
        f = problem.lbar_field
        traj = run(SchemeConfig(h=0.01, T=0.05, guard=GUARD), f, problem)
        assert traj.completed
        for s in traj.states:
            assert s.sup_coeff_distance(f) <= 1e-13

    def test_acceptance_run_completes(self, acceptance_runs):
        traj = acceptance_runs[0.01]
        assert traj.completed and len(traj.states) == 21 and traj.abort is None
        assert all(r["propertyP_margins"] is not None and min(r["propertyP_margins"]) >= 0
                   for r in traj.ledger)

    def test_initial_violation_rejected(self, problem):
        bad = DualField.constant(problem.grid, problem.basis, [1.0, 0, 0.5])
        with pytest.raises(HypothesisViolation) as exc:
            run(SchemeConfig(h=0.01, T=0.05, guard=GUARD), bad, problem)
        assert exc.value.step == 0

    def test_initial_distance_bound(self, problem, l0):
        with pytest.raises(HypothesisViolation):
            run(SchemeConfig(h=0.01, T=0.05, guard=GUARD, initial_delta1=1e-6), l0, problem)

    def test_abort_returns_partial_trajectory(self):
        prob = canonical_problem(N=32)
        l0 = canonical_l0(prob, 0.2)
        guard = PropertyPParams(1.2, 1.3, 0.5, 0.55)
        traj = run(SchemeConfig(h=0.05, T=1.0, guard=guard), l0, prob)
        assert not traj.completed
        assert isinstance(traj.abort, HypothesisViolation)
        assert traj.abort.step == len(traj.states) and len(traj.ledger) == len(traj.states)
        with pytest.raises(HypothesisViolation):
            traj.raise_if_aborted()

    def test_mismatched_initial_field(self, problem):
        other = DualField.constant(XGrid(1, 1.0, 32), problem.basis, LBAR)
        with pytest.raises(ValueError):
            run(SchemeConfig(h=0.01, T=0.05), other, problem)


@pytest.fixture(scope="module")
def bgk_traj():
    prob = canonical_problem(N=16)
    return run(SchemeConfig(variant="bgk", h=0.02, T=0.1, guard=GUARD, ledger_on=False),
               canonical_l0(prob, 0.05), prob)


class TestInterpolants:
    def samples(self, n=50, seed=3):
        rng = np.random.default_rng(seed)
        return rng.uniform(0, 1, n), rng.uniform(-1.2, 1.2, n)

    def test_tp_nodes(self, acceptance_runs):
        traj = acceptance_runs[0.01]
        x, v = self.samples()
        for n in (0, 7, 20):
            lv = np.stack([np.ones_like(v), v, v**2], 1)
            from kinsplit.dual_field import interp_all
            exact = np.einsum("mk,mk->m", interp_all(traj.states[n], x), lv)
            np.testing.assert_allclose(interpolant_tp(traj, x, n * traj.h, v), exact, atol=1e-13)

    def test_tp_junctions(self, acceptance_runs):
        traj = acceptance_runs[0.01]
        x, v = self.samples()
        h = traj.h
        for n in range(20):
            for tj in ((n + 0.5) * h, (n + 1) * h):
                lo = interpolant_tp(traj, x, np.nextafter(tj, -1), v)
                hi = interpolant_tp(traj, x, min(np.nextafter(tj, 1), 20 * h), v)
                assert np.max(np.abs(lo - hi)) <= 1e-12

    def test_bgk_junctions(self, bgk_traj):
        x, v = self.samples()
        h = bgk_traj.h
        for n in range(5):
            for frac in (1 / 3, 2 / 3, 1.0):
                tj = (n + frac) * h
                lo = interpolant_bgk(bgk_traj, x, np.nextafter(tj, -1), v)
                hi = interpolant_bgk(bgk_traj, x, min(np.nextafter(tj, 1), 5 * h), v)
                assert np.max(np.abs(lo - hi)) <= 1e-12

    def test_constant_interpolant(self, problem):
        traj = run(SchemeConfig(h=0.01, T=0.03, guard=None, ledger_on=False), problem.lbar_field, problem)
        x, v = self.samples()
        t = np.linspace(0, 0.03, len(x))
        np.testing.assert_allclose(interpolant_tp(traj, x, t, v), v**2 - 1, atol=1e-13)

    def test_time_range(self, acceptance_runs):
        with pytest.raises(ValueError):
            interpolant_tp(acceptance_runs[0.01], [0.1], [0.5], [0.0])

    def test_bgk_requires_bgk(self, acceptance_runs):
        with pytest.raises(ValueError):
            interpolant_bgk(acceptance_runs[0.01], [0.1], [0.1], [0.0])
