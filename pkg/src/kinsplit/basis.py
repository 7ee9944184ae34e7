"""Polynomial basis of the dual space E* and the property-P nondegeneracy check."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import TailUnbounded

# one polynomial = tuple of (coefficient, multi-index) terms
Poly = tuple[tuple[float, tuple[int, ...]], ...]

MIN_SAMPLE_DENSITY = 10.0


def monomial(*alpha: int) -> Poly:
    return ((1.0, tuple(alpha)),)


def radial_power(d: int, m0: int) -> Poly:
    """``|v|**m0`` for even ``m0`` expanded into monomials."""
    if m0 % 2:
        raise ValueError("m0 must be even for |v|^m0 to be a polynomial")
    from math import factorial
    from itertools import product

    half = m0 // 2
    terms: dict[tuple[int, ...], float] = {}
    for ks in product(range(half + 1), repeat=d):
        if sum(ks) != half:
            continue
        coef = factorial(half)
        for kk in ks:
            coef //= factorial(kk)
        alpha = tuple(2 * kk for kk in ks)
        terms[alpha] = terms.get(alpha, 0.0) + float(coef)
    return tuple((c, a) for a, c in sorted(terms.items()))


@dataclass(frozen=True)
class PolyBasis:
    d: int
    entries: tuple[Poly, ...]
    m0: int
    e0_indices: tuple[int, ...] | None = None
    name: str = "custom"

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("velocity dimension must be 1, 2 or 3")
        if len(self.entries) < 2:
            raise ValueError("basis needs at least the constant and the radial top element")
        if _canon(self.entries[0]) != _canon(monomial(*([0] * self.d))):
            raise ValueError("first basis element must be the constant 1")
        if _canon(self.entries[-1]) != _canon(radial_power(self.d, self.m0)):
            raise ValueError(f"last basis element must be |v|^{self.m0}")
        if max(self.degrees) > self.m0:
            raise ValueError("no basis element may exceed the degree of |v|^m0")
        if self.e0_indices is not None and len(self.e0_indices) != self.d + 2:
            raise ValueError("E0* sub-basis must have d+2 elements {1, v, |v|^2}")
        self._check_independent()

    @property
    def k(self) -> int:
        return len(self.entries)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([max(sum(a) for c, a in e if c != 0) for e in self.entries])

    def _check_independent(self, radius: float = 1.0):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-radius, radius, size=(max(200, 20 * self.k), self.d))
        A = eval_basis(self, pts)
        s = np.linalg.svd(A, compute_uv=False)
        if s[-1] <= 1e-10 * s[0]:
            raise ValueError("basis polynomials are linearly dependent")

    def subbasis(self) -> "PolyBasis":
        """The E0* basis {1, v_1..v_d, |v|^2}."""
        if self.e0_indices is None:
            raise ValueError("basis has no E0* sub-basis")
        entries = tuple(self.entries[i] for i in self.e0_indices)
        return PolyBasis(self.d, entries, 2, tuple(range(self.d + 2)), self.name + "/E0")


def _canon(p: Poly):
    acc: dict[tuple[int, ...], float] = {}
    for c, a in p:
        acc[tuple(a)] = acc.get(tuple(a), 0.0) + c
    return {a: c for a, c in acc.items() if c != 0}


def from_monomials(d: int, exponents: Sequence[Sequence[int]], name: str = "custom") -> PolyBasis:
    """Basis of plain monomials. In d=1 the last exponent is ``m0``; in d>1 the
    last entry is replaced by ``|v|^m0`` with ``m0`` the total degree given."""
    entries = [monomial(*e) for e in exponents]
    m0 = sum(exponents[-1])
    if d > 1:
        entries[-1] = radial_power(d, m0)
    entries = tuple(entries)
    e0 = _find_e0(d, entries)
    return PolyBasis(d, entries, m0, e0, name)


def _find_e0(d: int, entries: Sequence[Poly]) -> tuple[int, ...] | None:
    targets = [monomial(*([0] * d))]
    for a in range(d):
        e = [0] * d
        e[a] = 1
        targets.append(monomial(*e))
    targets.append(radial_power(d, 2))
    canon = [_canon(e) for e in entries]
    idx = []
    for t in targets:
        try:
            idx.append(canon.index(_canon(t)))
        except ValueError:
            return None
    return tuple(idx)


def preset(name: str) -> PolyBasis:
    if name == "1d-k3":
        return from_monomials(1, [(0,), (1,), (2,)], name)
    if name == "1d-k5":
        return from_monomials(1, [(0,), (1,), (2,), (3,), (4,)], name)
    if name == "3d-euler":
        entries = (monomial(0, 0, 0), monomial(1, 0, 0), monomial(0, 1, 0), monomial(0, 0, 1),
                   radial_power(3, 2))
        return PolyBasis(3, entries, 2, (0, 1, 2, 3, 4), name)
    raise KeyError(f"unknown basis preset {name!r}")


PRESETS = ("1d-k3", "1d-k5", "3d-euler")


def eval_basis(basis: PolyBasis, v) -> np.ndarray:
    """Values ``l_i(v)``; ``v`` has trailing axis of length d (or is scalar for d=1)."""
    v = np.asarray(v, dtype=float)
    if basis.d == 1 and (v.ndim == 0 or v.shape[-1] != 1):
        v = v[..., None]
    if v.shape[-1] != basis.d:
        raise ValueError(f"expected points of dimension {basis.d}")
    if not np.all(np.isfinite(v)):
        raise ValueError("velocity points must be finite")
    out = np.zeros(v.shape[:-1] + (basis.k,))
    for i, poly in enumerate(basis.entries):
        acc = np.zeros(v.shape[:-1])
        for c, alpha in poly:
            term = np.full(v.shape[:-1], c)
            for a, e in enumerate(alpha):
                if e:
                    term = term * v[..., a] ** e
            acc = acc + term
        out[..., i] = acc
    return out


def eval_dual(basis: PolyBasis, gamma, v) -> np.ndarray | float:
    """``sum_i gamma_i l_i(v)``; ``gamma`` may carry leading batch axes."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape[-1] != basis.k:
        raise ValueError(f"gamma has {gamma.shape[-1]} entries, basis has {basis.k}")
    out = eval_basis(basis, v) @ gamma if gamma.ndim == 1 else gamma @ eval_basis(basis, v).T
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class PropertyPParams:
    R: float
    delta1: float
    r: float
    delta2: float
    center_search_grid: tuple[tuple[float, ...], ...] | None = None
    sample_density: float | None = None

    def __post_init__(self):
        for name in ("R", "delta1", "r", "delta2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"property-P parameter {name} must be positive")
        if not self.R > self.r:
            raise ValueError("need R > r")

    def centers(self, d: int) -> np.ndarray:
        if self.center_search_grid is not None:
            return np.asarray(self.center_search_grid, dtype=float).reshape(-1, d)
        step = self.r / 2
        n = int(np.floor(self.R / step + 1e-12))
        ax = step * np.arange(-n, n + 1)
        grid = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
        return grid[np.linalg.norm(grid, axis=1) <= self.R + 1e-12]


@dataclass
class PReport:
    holds: bool | np.ndarray
    margins: np.ndarray  # (..., 3): tail, lower bound, core; all >= 0 when P holds
    tail_certified: bool | np.ndarray = True
    best_center: np.ndarray | None = field(default=None, repr=False)


def _sample_grid(d: int, R_ext: float, density: float) -> np.ndarray:
    n = int(np.ceil(R_ext * density))
    ax = np.linspace(-R_ext, R_ext, 2 * n + 1)
    grid = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return grid[np.linalg.norm(grid, axis=1) <= R_ext + 1e-12]


def default_density(d: int) -> float:
    return 200.0 if d == 1 else 50.0


class PropertyPChecker:
    """Precomputes the sample layout so repeated checks are a matrix product."""

    def __init__(self, basis: PolyBasis, params: PropertyPParams, sample_density: float | None = None):
        density = sample_density or params.sample_density or default_density(basis.d)
        if density < MIN_SAMPLE_DENSITY:
            raise ValueError(f"sample density {density} below minimum {MIN_SAMPLE_DENSITY}")
        self.basis, self.params, self.density = basis, params, density
        # the tail bound below needs |v| >= 1
        self.R_ext = max(2.0 * params.R, 1.0)
        pts = _sample_grid(basis.d, self.R_ext, density)
        radius = np.linalg.norm(pts, axis=1)
        self.outer = radius > params.R
        self.inner = radius < params.R
        self.vals = eval_basis(basis, pts)  # (S, k)
        centers = params.centers(basis.d)
        dist = np.linalg.norm(pts[None, :, :] - centers[:, None, :], axis=2)
        self.core_masks = dist <= params.r  # (C, S)
        keep = self.core_masks.any(axis=1)
        self.core_masks, self.centers = self.core_masks[keep], centers[keep]
        self.top = basis.k - 1
        self.degrees = basis.degrees
        self._tail_scale = np.array(
            [sum(abs(c) for c, _ in e) for e in basis.entries]) * self.R_ext ** (
                self.degrees.astype(float) - basis.m0)

    def __call__(self, gamma) -> PReport:
        gamma = np.asarray(gamma, dtype=float)
        single = gamma.ndim == 1
        g = np.atleast_2d(gamma)
        top = g[:, self.top]
        if np.any(top < 0):
            raise TailUnbounded(
                "leading radial coefficient is negative; l -> -inf as |v| -> inf",
                index=int(np.flatnonzero(top < 0)[0]))
        l = g @ self.vals.T  # (B, S)
        p = self.params
        m_tail = np.min(np.where(self.outer, l, np.inf), axis=1)
        m_low = np.min(np.where(self.inner, l, np.inf), axis=1) + p.delta1
        core_max = np.stack([np.max(np.where(m, l, -np.inf), axis=1) for m in self.core_masks], axis=1)
        best = np.argmin(core_max, axis=1)
        m_core = -p.delta2 - core_max[np.arange(len(g)), best]
        cert = self._tail_certificate(g)
        margins = np.stack([m_tail, m_low, m_core], axis=1)
        holds = (margins >= 0).all(axis=1) & cert
        if single:
            return PReport(bool(holds[0]), margins[0], bool(cert[0]), self.centers[best[0]])
        return PReport(holds, margins, cert, self.centers[best])

    def _tail_certificate(self, g: np.ndarray) -> np.ndarray:
        # |v| >= R_ext: l >= |v|^m0 (gamma_top - sum_{i<top} |gamma_i| |coef_i| R_ext^(deg_i - m0))
        # when every other entry has degree < m0
        low = np.abs(g[:, : self.top]) @ self._tail_scale[: self.top]
        top = g[:, self.top]
        ok = top > low
        nonconst = np.abs(g[:, 1: self.top]).sum(axis=1) == 0
        # degenerate top: only a nonnegative constant survives at infinity
        ok |= (top == 0) & nonconst & (g[:, 0] >= 0)
        return ok


def check_property_P(basis: PolyBasis, gamma, params: PropertyPParams,
                     sample_density: float | None = None) -> PReport:
    return PropertyPChecker(basis, params, sample_density)(gamma)
