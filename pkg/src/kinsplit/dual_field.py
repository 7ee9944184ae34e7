"""Dual fields l(x, v) = sum_i gamma_i(x) l_i(v) on a periodic x-grid.

Coefficient functions are represented by their grid values and interpolated
trigonometrically, so shifts and derivatives of band-limited data are exact.
The Nyquist mode of each axis is treated as a cosine (the real symmetric
interpolant), which keeps every operation real.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import product
from pathlib import Path

import numpy as np

from .basis import PolyBasis, eval_basis
from .entropy import EntropyParams, weight
from .vquad import VQuadrature, ball_quadrature


@dataclass(frozen=True)
class XGrid:
    d_x: int = 1
    L: float = 1.0
    N: int = 64

    def __post_init__(self):
        if self.N % 2 or self.N < 8:
            raise ValueError("grid size N must be even and at least 8")
        if not self.L > 0:
            raise ValueError("period L must be positive")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d_x

    @property
    def size(self) -> int:
        return self.N**self.d_x

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d_x

    @property
    def axis(self) -> np.ndarray:
        return np.arange(self.N) * self.dx

    @cached_property
    def points(self) -> np.ndarray:
        """Grid points as (size, d_x), C order."""
        mesh = np.meshgrid(*([self.axis] * self.d_x), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.N, d=self.dx)

    @property
    def nyquist(self) -> int:
        return self.N // 2


def _axis_factors(grid: XGrid, coord: np.ndarray) -> np.ndarray:
    """Mode factors e^{i kappa x} for each coordinate, Nyquist taken as cos(kappa x)."""
    kap = grid.wavenumbers
    f = np.exp(1j * np.multiply.outer(coord, kap))
    f[..., grid.nyquist] = np.cos(np.multiply.outer(coord, kap[grid.nyquist]))
    return f


def shift_multiplier(grid: XGrid, shifts: np.ndarray) -> np.ndarray:
    """Spectral multipliers realising l(x) -> l(x - s); shape (S, *grid.shape)."""
    shifts = np.asarray(shifts, dtype=float).reshape(-1, grid.d_x)
    out = np.ones((len(shifts),) + grid.shape, dtype=complex)
    for a in range(grid.d_x):
        fa = _axis_factors(grid, -shifts[:, a])  # (S, N)
        out = out * fa.reshape((len(shifts),) + (1,) * a + (grid.N,) + (1,) * (grid.d_x - a - 1))
    return out


def derivative_multiplier(grid: XGrid, alpha: tuple[int, ...]) -> np.ndarray:
    out = np.ones(grid.shape, dtype=complex)
    kap = grid.wavenumbers
    for a, m in enumerate(alpha):
        if m == 0:
            continue
        fa = (1j * kap) ** m
        fa[grid.nyquist] = ((1j * kap[grid.nyquist]) ** m).real
        out = out * fa.reshape((1,) * a + (grid.N,) + (1,) * (grid.d_x - a - 1))
    return out


def multi_indices(d_x: int, max_order: int = 3, exact: int | None = None):
    for alpha in product(range(max_order + 1), repeat=d_x):
        s = sum(alpha)
        if (exact is None and s <= max_order) or s == exact:
            yield alpha


@dataclass(frozen=True, eq=False)
class DualField:
    grid: XGrid
    basis: PolyBasis
    coeffs: np.ndarray  # (k, *grid.shape)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.basis.k,) + self.grid.shape:
            raise ValueError(f"coefficient array has shape {c.shape}, expected "
                             f"{(self.basis.k,) + self.grid.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("dual field coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def constant(cls, grid: XGrid, basis: PolyBasis, gamma) -> "DualField":
        gamma = np.asarray(gamma, dtype=float)
        return cls(grid, basis, np.broadcast_to(gamma.reshape((-1,) + (1,) * grid.d_x),
                                                (basis.k,) + grid.shape).copy())

    @property
    def per_point(self) -> np.ndarray:
        """Coefficients as (grid.size, k)."""
        return self.coeffs.reshape(self.basis.k, -1).T

    @classmethod
    def from_points(cls, grid: XGrid, basis: PolyBasis, gamma_points) -> "DualField":
        return cls(grid, basis, np.asarray(gamma_points).T.reshape((basis.k,) + grid.shape))

    @cached_property
    def spectrum(self) -> np.ndarray:
        return np.fft.fftn(self.coeffs, axes=tuple(range(1, self.grid.d_x + 1)))

    def __add__(self, other: "DualField") -> "DualField":
        _check_compatible(self, other)
        return DualField(self.grid, self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other: "DualField") -> "DualField":
        _check_compatible(self, other)
        return DualField(self.grid, self.basis, self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "DualField":
        return DualField(self.grid, self.basis, c * self.coeffs)

    __rmul__ = __mul__

    def nodal(self, quad: VQuadrature) -> np.ndarray:
        """l(x_j, v_q) as (grid.size, Q)."""
        return self.per_point @ _basis_at(self.basis, quad).T

    def sup_coeff_distance(self, other: "DualField") -> float:
        _check_compatible(self, other)
        return float(np.max(np.abs(self.coeffs - other.coeffs)))


def _check_compatible(a: DualField, b: DualField):
    if a.grid != b.grid or a.basis != b.basis:
        raise ValueError("fields live on different grids or bases")


@dataclass(frozen=True, eq=False)
class SampledField:
    """Values s(x_j, v_q) as (grid.size, Q)."""
    grid: XGrid
    quad: VQuadrature
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.size, self.quad.size):
            raise ValueError("sampled field has wrong shape")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sampled field values must be finite")


_BASIS_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _basis_at(basis: PolyBasis, quad: VQuadrature) -> np.ndarray:
    key = (id(basis), id(quad))
    hit = _BASIS_CACHE.get(key)
    if hit is None or hit[0] is not basis or hit[1] is not quad:
        hit = (basis, quad, eval_basis(basis, quad.nodes))
        _BASIS_CACHE[key] = hit
    return hit[2]


def interp_coeff(field: DualField, i: int, x_star) -> np.ndarray | float:
    """Trigonometric interpolant of gamma_i at arbitrary points (wrapped into the period)."""
    return _interp_spectrum(field.grid, field.spectrum[i], x_star)


def interp_all(field: DualField, x_star) -> np.ndarray:
    """All coefficients at the given points, shape (M, k)."""
    x = np.asarray(x_star, dtype=float).reshape(-1, field.grid.d_x)
    return np.stack([_interp_spectrum(field.grid, field.spectrum[i], x)
                     for i in range(field.basis.k)], axis=-1)


def _interp_spectrum(grid: XGrid, spec: np.ndarray, x_star):
    x = np.asarray(x_star, dtype=float)
    scalar = x.ndim == 0 or (grid.d_x > 1 and x.ndim == 1)
    x = np.mod(x.reshape(-1, grid.d_x), grid.L)
    acc = _axis_factors(grid, x[:, 0]) @ spec.reshape(grid.N, -1)  # (M, rest)
    for a in range(1, grid.d_x):
        fa = _axis_factors(grid, x[:, a])
        acc = np.einsum("mn,mnr->mr", fa, acc.reshape(len(x), grid.N, -1))
    out = acc.reshape(-1).real / grid.size
    return float(out[0]) if scalar else out


def eval_at(field: DualField, x, v) -> np.ndarray:
    """l(x_m, v_m) for paired point lists."""
    g = interp_all(field, x)
    lv = eval_basis(field.basis, v).reshape(len(g), -1)
    return np.einsum("mk,mk->m", g, lv)


def shifted_coeffs(field: DualField, shifts) -> np.ndarray:
    """gamma_i(x_j - s) for each shift s: shape (S, k, grid.size)."""
    mult = shift_multiplier(field.grid, shifts)  # (S, *shape)
    axes = tuple(range(2, field.grid.d_x + 2))
    vals = np.fft.ifftn(field.spectrum[None] * mult[:, None], axes=axes).real
    return vals.reshape(len(mult), field.basis.k, -1)


def transport(field: DualField, h: float, quad: VQuadrature) -> SampledField:
    """Free transport over time h: values l(x_j - h v_q, v_q)."""
    if h < 0:
        raise ValueError("time step must be nonnegative")
    lv = _basis_at(field.basis, quad)  # (Q, k)
    if h == 0:
        return SampledField(field.grid, quad, field.nodal(quad))
    g = shifted_coeffs(field, h * quad.nodes)  # (Q, k, P)
    vals = np.einsum("qkp,qk->pq", g, lv)
    return SampledField(field.grid, quad, vals)


def x_derivative(field: DualField, alpha) -> DualField:
    alpha = tuple(int(a) for a in np.atleast_1d(alpha))
    if len(alpha) != field.grid.d_x or min(alpha) < 0:
        raise ValueError("multi-index does not match the x-dimension")
    if sum(alpha) > 3:
        raise ValueError("derivatives of order above 3 are not supported")
    if sum(alpha) == 0:
        return field
    mult = derivative_multiplier(field.grid, alpha)
    axes = tuple(range(1, field.grid.d_x + 1))
    vals = np.fft.ifftn(field.spectrum * mult[None], axes=axes).real
    return DualField(field.grid, field.basis, vals)


def weighted_sq_integral(field: DualField, weight_nodal: np.ndarray, quad: VQuadrature) -> float:
    """sum_j dV int |l|^2 w dv for precomputed weight samples (grid.size, Q)."""
    vals = field.nodal(quad)
    return float(field.grid.cell_volume * np.sum((vals**2 * weight_nodal) @ quad.weights))


def x_norm_sq_terms(field: DualField, params: EntropyParams, quad: VQuadrature,
                    weight_source: DualField | None = None, max_order: int = 3) -> dict:
    """Per multi-index contributions to the squared X-norm."""
    src = field if weight_source is None else weight_source
    w = weight(src.nodal(quad), params)
    return {alpha: weighted_sq_integral(x_derivative(field, alpha), w, quad)
            for alpha in multi_indices(field.grid.d_x, max_order)}


def x_norm(field: DualField, params: EntropyParams, quad: VQuadrature,
           weight_source: DualField | None = None) -> float:
    """Weighted H^3-in-x, L^2-in-v norm; the weight is w(weight_source), default w(field)."""
    return float(np.sqrt(sum(x_norm_sq_terms(field, params, quad, weight_source).values())))


@lru_cache(maxsize=16)
def _ball(d: int, R: float, panels: int, nodes: int) -> VQuadrature:
    return ball_quadrature(d, R, panels, nodes)


def ball_rule_for(quad: VQuadrature, R: float) -> VQuadrature:
    return _ball(quad.d, float(R), quad.panels, quad.nodes_per_panel)


def ball_sq_distance(a_vals: np.ndarray, b_vals: np.ndarray, ball: VQuadrature) -> np.ndarray:
    """Per grid point int_{B_R} |a - b|^2 dv for nodal values on the ball rule."""
    return ((a_vals - b_vals) ** 2) @ ball.weights


def sup_ball_l2_distance(fieldA: DualField, fieldB: DualField, quad: VQuadrature, R: float) -> float:
    _check_compatible(fieldA, fieldB)
    ball = ball_rule_for(quad, R)
    return float(np.max(ball_sq_distance(fieldA.nodal(ball), fieldB.nodal(ball), ball)))


def write_field_csv(field: DualField, path: str | Path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x_index"] + [f"gamma_{i + 1}" for i in range(field.basis.k)])
        for j, row in enumerate(field.per_point):
            wr.writerow([j] + [repr(float(c)) for c in row])


def read_field_csv(path: str | Path, grid: XGrid, basis: PolyBasis) -> DualField:
    with Path(path).open() as fh:
        rd = csv.reader(fh)
        header = next(rd)
        expected = ["x_index"] + [f"gamma_{i + 1}" for i in range(basis.k)]
        if header != expected:
            raise ValueError(f"bad field CSV header {header}")
        rows = [[float(c) for c in r[1:]] for r in rd]
    return DualField.from_points(grid, basis, np.array(rows))
