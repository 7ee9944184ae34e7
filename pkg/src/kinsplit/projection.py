"""Pointwise weighted-L2 projection of v-samples onto E* or onto E0*."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import PolyBasis, eval_basis
from .dual_field import DualField, SampledField, _basis_at
from .entropy import EntropyParams, weight
from .errors import DegenerateWeight, SolverFailure
from .vquad import VQuadrature

TOL_PROJ = 1e-10
EPS_GRAM = 1e-12


@dataclass
class GramSystem:
    G: np.ndarray  # (..., k, k)
    b: np.ndarray  # (..., k)
    cond_estimate: np.ndarray
    lam_min: np.ndarray


def gram_system(target: np.ndarray, w: np.ndarray, lv: np.ndarray, quad: VQuadrature) -> GramSystem:
    """Normal equations for samples ``target`` (P, Q) under weights ``w`` (P, Q)."""
    ww = w * quad.weights
    G = np.einsum("pq,qi,qj->pij", ww, lv, lv)
    G = 0.5 * (G + np.swapaxes(G, -1, -2))
    b = np.einsum("pq,qi->pi", target * ww, lv)
    lam = np.linalg.eigvalsh(G)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(lam[:, 0] > 0, lam[:, -1] / lam[:, 0], np.inf)
    return GramSystem(G, b, cond, lam[:, 0])


def solve_spd(G: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Batched Cholesky solve G x = b."""
    L = np.linalg.cholesky(G)
    y = np.linalg.solve(L, b[..., None])
    return np.linalg.solve(np.swapaxes(L, -1, -2), y)[..., 0]


def project_samples(target: np.ndarray, w: np.ndarray, lv: np.ndarray, quad: VQuadrature,
                    tol_proj: float = TOL_PROJ, eps_gram: float = EPS_GRAM,
                    precond: np.ndarray | None = None) -> tuple[np.ndarray, GramSystem]:
    """Coefficients (P, k) of the weighted projection of each row of ``target``.

    ``precond`` is an optional change of basis T (k, k); the solve then runs in
    the better conditioned coordinates ``lv @ T``.
    """
    target = np.atleast_2d(target)
    w = np.atleast_2d(w)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    lv_solve = lv if precond is None else lv @ precond
    sys = gram_system(target, w, lv_solve, quad)
    k = lv.shape[1]
    trace = np.trace(sys.G, axis1=1, axis2=2)
    floor = eps_gram * trace / k
    bad = ~(sys.lam_min >= floor) | ~(trace > 0)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise DegenerateWeight(
            f"weighted Gram matrix is singular at grid point {j} "
            f"(lambda_min={sys.lam_min[j]:.3e}); the state left the property-P neighbourhood",
            index=j)
    gamma = solve_spd(sys.G, sys.b)
    res = np.abs(np.einsum("pij,pj->pi", sys.G, gamma) - sys.b).max(axis=1)
    scale = np.abs(sys.b).max(axis=1)
    fail = res > tol_proj * scale
    if np.any(fail):
        j = int(np.flatnonzero(fail)[0])
        raise SolverFailure(f"projection residual {res[j]:.3e} exceeds tolerance at grid point {j}",
                            index=j)
    if precond is not None:
        gamma = gamma @ precond.T
    return gamma, sys


def project_point(target_samples, weight_samples, basis: PolyBasis, quad: VQuadrature,
                  tol_proj: float = TOL_PROJ, eps_gram: float = EPS_GRAM) -> np.ndarray:
    lv = eval_basis(basis, quad.nodes)
    gamma, _ = project_samples(np.asarray(target_samples, float)[None],
                               np.asarray(weight_samples, float)[None], lv, quad, tol_proj, eps_gram)
    return gamma[0]


class Projector:
    """Projection onto E* (``subspace="full"``) or E0* (``"e0"``) with lagged weights."""

    def __init__(self, basis: PolyBasis, quad: VQuadrature, params: EntropyParams,
                 tol_proj: float = TOL_PROJ, eps_gram: float = EPS_GRAM,
                 reference: np.ndarray | None = None):
        self.basis, self.quad, self.params = basis, quad, params
        self.tol_proj, self.eps_gram = tol_proj, eps_gram
        self.lv = _basis_at(basis, quad)
        self.precond = None
        if reference is not None and (basis.k > 5 or basis.d > 1):
            # orthonormalise once against the reference weight
            w_ref = weight(self.lv @ np.asarray(reference, float), params)
            G = np.einsum("q,qi,qj->ij", w_ref * quad.weights, self.lv, self.lv)
            self.precond = np.linalg.inv(np.linalg.cholesky(G)).T

    def _columns(self, subspace: str) -> np.ndarray:
        if subspace == "full":
            return np.arange(self.basis.k)
        if subspace == "e0":
            if self.basis.e0_indices is None:
                raise ValueError("basis has no E0* sub-basis")
            return np.asarray(self.basis.e0_indices)
        raise ValueError(f"unknown subspace {subspace!r}")

    def weights_of(self, weight_source: DualField) -> np.ndarray:
        return weight(weight_source.nodal(self.quad), self.params)

    def project(self, target: np.ndarray, w: np.ndarray, subspace: str = "full") -> np.ndarray:
        """Coefficients (P, k), zero outside the chosen subspace."""
        cols = self._columns(subspace)
        precond = self.precond if subspace == "full" else None
        g, _ = project_samples(target, w, self.lv[:, cols], self.quad, self.tol_proj,
                               self.eps_gram, precond)
        out = np.zeros((g.shape[0], self.basis.k))
        out[:, cols] = g
        return out

    def project_field(self, target: SampledField, weight_source: DualField,
                      subspace: str = "full") -> DualField:
        if target.grid != weight_source.grid:
            raise ValueError("target and weight source live on different grids")
        w = self.weights_of(weight_source)
        gamma = self.project(target.values, w, subspace)
        return DualField.from_points(weight_source.grid, self.basis, gamma)


def project_field(target: SampledField, weight_source: DualField, quad: VQuadrature,
                  params: EntropyParams, subspace: str = "full", **kw) -> DualField:
    return Projector(weight_source.basis, quad, params, **kw).project_field(
        target, weight_source, subspace)


def conservation_residual(new_vals: np.ndarray, target: np.ndarray, w: np.ndarray,
                          lv: np.ndarray, quad: VQuadrature) -> np.ndarray:
    """Per point max_i |int (new - target) l_i w| / (1 + |int target l_i w|)."""
    ww = w * quad.weights
    lhs = np.einsum("pq,qi->pi", (new_vals - target) * ww, lv)
    ref = np.einsum("pq,qi->pi", target * ww, lv)
    return np.max(np.abs(lhs) / (1.0 + np.abs(ref)), axis=1)
