"""Macroscopic side of the closure: moments U_i = int l_i W(l) dv, fluxes,
Newton inversion of the moment map, and a finite-volume reference solver
for dU/dt + dF(U)/dx = 0 on the periodic line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import PolyBasis, eval_basis
from .dual_field import XGrid
from .entropy import EntropyParams, W_antideriv, weight
from .errors import DegenerateWeight, NoConvergence
from .projection import EPS_GRAM, solve_spd
from .vquad import VQuadrature

NEWTON_RTOL = 1e-10
NEWTON_MAXITER = 50
CFL_MAX = 0.4


def _lv(basis: PolyBasis, quad: VQuadrature) -> np.ndarray:
    return eval_basis(basis, quad.nodes)


def moments_from_coeffs(gamma, basis: PolyBasis, quad: VQuadrature, params: EntropyParams) -> np.ndarray:
    gamma = np.asarray(gamma, float)
    lv = _lv(basis, quad)
    W = W_antideriv(gamma @ lv.T, params)
    return (W * quad.weights) @ lv


def moment_jacobian(gamma, basis: PolyBasis, quad: VQuadrature, params: EntropyParams) -> np.ndarray:
    """dU_i/dgamma_j = int l_i l_j w(l) dv, the weighted Gram matrix."""
    gamma = np.asarray(gamma, float)
    lv = _lv(basis, quad)
    w = weight(gamma @ lv.T, params) * quad.weights
    return np.einsum("...q,qi,qj->...ij", w, lv, lv)


def flux_from_coeffs(gamma, basis: PolyBasis, quad: VQuadrature, params: EntropyParams) -> np.ndarray:
    """F[..., i, a] = int v_a l_i W(l) dv."""
    gamma = np.asarray(gamma, float)
    lv = _lv(basis, quad)
    W = W_antideriv(gamma @ lv.T, params) * quad.weights
    return np.einsum("...q,qi,qa->...ia", W, lv, quad.nodes)


def wave_speeds(gamma, basis: PolyBasis, quad: VQuadrature, params: EntropyParams, axis: int = 0) -> np.ndarray:
    """Eigenvalues of dF_a/dU, i.e. of the pencil (int v_a l l^T w, int l l^T w)."""
    gamma = np.atleast_2d(np.asarray(gamma, float))
    lv = _lv(basis, quad)
    w = weight(gamma @ lv.T, params) * quad.weights
    G = np.einsum("pq,qi,qj->pij", w, lv, lv)
    Gv = np.einsum("pq,qi,qj->pij", w * quad.nodes[:, axis], lv, lv)
    Linv = np.linalg.inv(np.linalg.cholesky(G))
    S = Linv @ Gv @ np.swapaxes(Linv, -1, -2)
    return np.linalg.eigvalsh(0.5 * (S + np.swapaxes(S, -1, -2)))


def coeffs_from_moments(U, gamma_guess, basis: PolyBasis, quad: VQuadrature, params: EntropyParams,
                        rtol: float = NEWTON_RTOL, maxiter: int = NEWTON_MAXITER,
                        eps_gram: float = EPS_GRAM) -> np.ndarray:
    """Invert the moment map by damped Newton iteration (batched over leading axes).

    The Jacobian is the weighted Gram matrix, symmetric positive definite as
    long as the iterate keeps a nonvanishing weight.  Steps are halved until
    the residual norm decreases.
    """
    U = np.atleast_2d(np.asarray(U, float))
    single = np.ndim(gamma_guess) == 1 and np.ndim(U) == 2 and U.shape[0] == 1
    g = np.broadcast_to(np.asarray(gamma_guess, float), U.shape).copy()
    tol = rtol * (1.0 + np.abs(U).max(axis=1))

    def residual(gg, rows=slice(None)):
        return moments_from_coeffs(gg, basis, quad, params) - U[rows]

    r = residual(g)
    rn = np.abs(r).max(axis=1)
    for _ in range(maxiter):
        active = rn > tol
        if not active.any():
            break
        idx = np.flatnonzero(active)
        J = moment_jacobian(g[idx], basis, quad, params)
        tr = np.trace(J, axis1=1, axis2=2)
        lam = np.linalg.eigvalsh(J)[:, 0]
        bad = ~(lam >= eps_gram * tr / basis.k) | ~(tr > 0)
        if bad.any():
            j = int(idx[np.flatnonzero(bad)[0]])
            raise DegenerateWeight(f"moment Jacobian singular at cell {j}", index=j)
        delta = solve_spd(J, r[idx])
        step = np.ones(len(idx))
        pending = np.ones(len(idx), bool)
        for _ in range(40):
            trial = g[idx] - step[:, None] * delta
            rt = residual(trial, idx)
            rtn = np.abs(rt).max(axis=1)
            ok = pending & (rtn < rn[idx])
            sel = idx[ok]
            g[sel], r[sel], rn[sel] = trial[ok], rt[ok], rtn[ok]
            pending &= ~ok
            if not pending.any():
                break
            step[pending] *= 0.5
        if pending.any():
            # no decrease possible: already at the rounding floor or stuck
            stuck = idx[pending]
            if np.any(rn[stuck] > tol[stuck]):
                break
    fail = rn > tol
    if fail.any():
        j = int(np.flatnonzero(fail)[0])
        raise NoConvergence(f"moment inversion did not converge at cell {j} "
                            f"(residual {rn[j]:.3e})", index=j)
    return g[0] if single else g


@dataclass
class MomentPDEResult:
    grid: XGrid
    U: np.ndarray  # (N, k) at the final time
    gamma: np.ndarray  # (N, k)
    dt: float
    steps: int
    totals: np.ndarray  # (steps+1, k) sum_j U_j dx, conserved


def solve_moment_pde(U0, grid: XGrid, dt: float, T: float, basis: PolyBasis, quad: VQuadrature,
                     params: EntropyParams, gamma_guess, cfl_max: float = CFL_MAX) -> MomentPDEResult:
    """Lax-Friedrichs (Rusanov) finite volumes for dU/dt + d/dx F(U) = 0, periodic.

    The interface dissipation uses the larger spectral radius of dF/dU in the
    two neighbouring cells.  ``dt`` must satisfy dt <= cfl_max*dx/R_quad; the
    last step is shortened implicitly by using T/ceil(T/dt).
    """
    if grid.d_x != 1:
        raise NotImplementedError("the reference moment solver is one-dimensional")
    U = np.asarray(U0, float).reshape(grid.N, basis.k).copy()
    vmax = quad.R_quad
    if dt > cfl_max * grid.dx / vmax * (1 + 1e-12):
        raise ValueError(f"dt={dt} violates the CFL bound {cfl_max}*dx/v_max = {cfl_max * grid.dx / vmax}")
    steps = max(1, math.ceil(T / dt - 1e-9))
    dt = T / steps
    gamma = coeffs_from_moments(U, gamma_guess, basis, quad, params)
    totals = [U.sum(axis=0) * grid.dx]
    lam = dt / grid.dx
    for n in range(steps):
        F = flux_from_coeffs(gamma, basis, quad, params)[:, :, 0]
        rho = np.abs(wave_speeds(gamma, basis, quad, params)).max(axis=1)
        alpha = np.maximum(rho, np.roll(rho, -1))
        Fhat = 0.5 * (F + np.roll(F, -1, axis=0)) - 0.5 * alpha[:, None] * (np.roll(U, -1, axis=0) - U)
        U = U - lam * (Fhat - np.roll(Fhat, 1, axis=0))
        try:
            gamma = coeffs_from_moments(U, gamma, basis, quad, params)
        except NoConvergence as err:
            err.step = n + 1
            raise
        totals.append(U.sum(axis=0) * grid.dx)
    return MomentPDEResult(grid, U, gamma, dt, steps, np.array(totals))


# ------------------------------------------------------------------ weak form

@dataclass(frozen=True)
class TestFunction:
    """psi(t, x) = bump on (t_a, t_b) times cos(2 pi m x / L + phase)."""
    __test__ = False  # keep pytest from collecting it
    t_a: float
    t_b: float
    m: int
    phase: float
    L: float = 1.0

    def _bump(self, t):
        s = (np.asarray(t, float) - self.t_a) / (self.t_b - self.t_a)
        y = 2 * s - 1
        inside = np.abs(y) < 1
        out = np.zeros_like(y)
        dout = np.zeros_like(y)
        yi = y[inside]
        b = np.exp(1 - 1 / (1 - yi**2))
        out[inside] = b
        # d/dt = d/dy * 2/(t_b - t_a)
        dout[inside] = b * (-2 * yi / (1 - yi**2) ** 2) * 2 / (self.t_b - self.t_a)
        return out, dout

    def parts(self, t, x):
        """(psi_t, psi_x) at broadcast (t, x)."""
        b, db = self._bump(t)
        k = 2 * np.pi * self.m / self.L
        arg = k * np.asarray(x, float) + self.phase
        return db * np.cos(arg), -b * k * np.sin(arg)

    def __call__(self, t, x):
        b, _ = self._bump(t)
        return b * np.cos(2 * np.pi * self.m * np.asarray(x, float) / self.L + self.phase)


def seeded_test_functions(count: int, T: float, L: float = 1.0, seed: int = 0) -> list[TestFunction]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        a = rng.uniform(0.05, 0.3) * T
        b = rng.uniform(0.7, 0.95) * T
        out.append(TestFunction(a, b, int(rng.integers(1, 3)), float(rng.uniform(0, 2 * np.pi)), L))
    return out


def weak_residual(traj, test_functions, nodes_per_panel: int = 4) -> np.ndarray:
    """Space-time-velocity quadrature of W(l^h) l_i (psi_t + v psi_x).

    Time panels follow the half steps of the interpolant so each panel sees a
    smooth integrand; x uses the periodic grid sum and v the run's rule.
    Returns an array (len(test_functions), k).
    """
    from .dual_field import shifted_coeffs, transport

    prob = traj.problem
    if prob.grid.d_x != 1:
        raise NotImplementedError("weak residual is implemented for one space dimension")
    basis, quad, params, grid = prob.basis, prob.quad, prob.params, prob.grid
    lv = eval_basis(basis, quad.nodes)
    vq = quad.nodes[:, 0]
    h = traj.h
    n_steps = len(traj.states) - 1
    gx, gw = np.polynomial.legendre.leggauss(nodes_per_panel)
    t_lo = min(tf.t_a for tf in test_functions)
    t_hi = max(tf.t_b for tf in test_functions)
    x = grid.axis
    res = np.zeros((len(test_functions), basis.k))
    for n in range(n_steps):
        if (n + 1) * h <= t_lo or n * h >= t_hi:
            continue
        cur, nxt = traj.states[n], traj.states[n + 1]
        shifted_full = transport(cur, h, quad).values  # l^n(x - h v, v)
        nxt_v = nxt.nodal(quad)
        for half in (0, 1):
            a0 = n * h + half * h / 2
            tn = a0 + (gx + 1) * h / 4
            tw = gw * h / 4
            if half == 0:
                g = shifted_coeffs(cur, np.outer(2 * (tn - n * h), vq).reshape(-1, 1))
                g = g.reshape(len(tn), len(vq), basis.k, -1)
                vals = np.einsum("tqkp,qk->tpq", g, lv)
            else:
                a = 2 * ((n + 1) * h - tn) / h
                vals = (1 - a)[:, None, None] * nxt_v[None] + a[:, None, None] * shifted_full[None]
            A = W_antideriv(vals, params) * quad.weights  # (t, P, Q)
            M1 = A @ lv  # (t, P, k)
            M2 = (A * vq) @ lv
            for m, tf in enumerate(test_functions):
                pt, px = tf.parts(tn[:, None], x[None, :])  # (t, P)
                integrand = np.einsum("tp,tpk->tk", pt, M1) + np.einsum("tp,tpk->tk", px, M2)
                res[m] += grid.dx * (tw @ integrand)
    return res
