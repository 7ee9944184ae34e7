"""Composite tensor Gauss-Legendre quadrature in the velocity variable."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class VQuadrature:
    d: int
    R_quad: float
    panels: int
    nodes_per_panel: int
    nodes: np.ndarray  # (Q, d)
    weights: np.ndarray  # (Q,)

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def v(self) -> np.ndarray:
        """Nodes as a flat vector for d=1, else (Q, d)."""
        return self.nodes[:, 0] if self.d == 1 else self.nodes


def _panel_rule(a: float, b: float, panels: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def build_quadrature(d: int, R_quad: float, panels: int = 16, nodes_per_panel: int = 6) -> VQuadrature:
    if panels < 1 or nodes_per_panel < 2 or not R_quad > 0 or d not in (1, 2, 3):
        raise ValueError("need panels >= 1, nodes_per_panel >= 2, R_quad > 0, d in {1,2,3}")
    x, w = _panel_rule(-R_quad, R_quad, panels, nodes_per_panel)
    grids = np.meshgrid(*([x] * d), indexing="ij")
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    quad = VQuadrature(d, float(R_quad), panels, nodes_per_panel, nodes, weights)
    _verify(quad)
    return quad


def _verify(quad: VQuadrature):
    vol = (2 * quad.R_quad) ** quad.d
    if abs(quad.weights.sum() - vol) > 1e-12 * vol:
        raise ArithmeticError("quadrature weights do not sum to the box measure")
    # one panel is exact up to degree 2n-1; the composite rule inherits it on the box
    deg = 2 * quad.nodes_per_panel - 1
    for e in range(0, deg + 1, 2 if quad.d > 1 else 1):
        exact = 0.0 if e % 2 else 2 * quad.R_quad ** (e + 1) / (e + 1) * (2 * quad.R_quad) ** (quad.d - 1)
        got = quad.weights @ quad.nodes[:, 0] ** e
        if abs(got - exact) > 1e-11 * max(1.0, abs(exact)) * quad.R_quad ** e:
            raise ArithmeticError(f"quadrature fails monomial exactness at degree {e}")


def ball_quadrature(d: int, R: float, panels: int = 16, nodes_per_panel: int = 6) -> VQuadrature:
    """Rule for integrals over the ball B_R.

    Exact interval rule for d=1; for d>1 the box rule on [-R, R]^d restricted
    to nodes inside the ball (first-order accurate at the sphere).
    """
    box = build_quadrature(d, R, panels, nodes_per_panel)
    if d == 1:
        return box
    inside = np.linalg.norm(box.nodes, axis=1) < R
    return VQuadrature(d, R, panels, nodes_per_panel, box.nodes[inside], box.weights[inside])


def integrate(quad: VQuadrature, samples) -> np.ndarray | float:
    """``sum_q w_q samples[..., q]``; the last axis runs over the nodes."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape[-1] != quad.size:
        raise ValueError(f"expected {quad.size} samples on the last axis, got {samples.shape[-1]}")
    out = samples @ quad.weights
    return out if np.ndim(out) else float(out)
