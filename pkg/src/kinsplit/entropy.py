"""Power-law entropy ``s(f) = f**p`` and the dual-side functions built from it.

All functions accept scalars or numpy arrays and broadcast elementwise.
The weight and its antiderivative are written in the ``-l`` convention:
they are supported where ``l <= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

P_MIN = 1.0
P_MAX = 1.2


@dataclass(frozen=True)
class EntropyParams:
    """Exponent ``p`` of the entropy and the scale ``c_bar`` of the weight.

    ``c_bar=None`` selects ``1/(p-1)``, which makes ``-W(l)`` equal to
    ``max(-l, 0)**(1/(p-1))`` with unit constant.
    """

    p: float = 9 / 8
    c_bar: float | None = None

    def __post_init__(self):
        if not (P_MIN < self.p < P_MAX):
            raise ValueError(f"p={self.p} outside the admissible range (1, 6/5)")
        if self.c_bar is None:
            object.__setattr__(self, "c_bar", 1.0 / (self.p - 1.0))
        if not self.c_bar > 0:
            raise ValueError(f"c_bar must be positive, got {self.c_bar}")
        # q + 1 == 1/(p-1) identically
        if not np.isclose(self.q + 1.0, 1.0 / (self.p - 1.0), rtol=1e-12):
            raise ArithmeticError("exponent identity q+1 = 1/(p-1) violated")

    @property
    def q(self) -> float:
        """Exponent of the weight, ``(2-p)/(p-1)``; exceeds 4 on the admissible range."""
        q = (2.0 - self.p) / (self.p - 1.0)
        # snap e.g. p=9/8 to the exact integer 7 so powers stay polynomial
        frac = Fraction(q).limit_denominator(1000)
        return float(frac) if abs(float(frac) - q) < 1e-12 else q

    @property
    def c_p(self) -> float:
        p = self.p
        return (p - 1.0) / p ** (p / (p - 1.0))


def s_primal(f, params: EntropyParams):
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("entropy density is defined for f >= 0 only")
    out = f ** params.p
    return out if out.ndim else float(out)


def s_star(l, params: EntropyParams):
    """Legendre transform ``c_p * max(l, 0)**(p/(p-1))``."""
    l = np.asarray(l, dtype=float)
    out = params.c_p * np.maximum(l, 0.0) ** (params.p / (params.p - 1.0))
    return out if out.ndim else float(out)


def weight(l, params: EntropyParams):
    """``c_bar * max(-l, 0)**q``; zero for ``l >= 0``."""
    l = np.asarray(l, dtype=float)
    out = params.c_bar * _neg_power(l, params.q)
    return out if out.ndim else float(out)


def weight_derivative(l, params: EntropyParams):
    l = np.asarray(l, dtype=float)
    out = -params.c_bar * params.q * _neg_power(l, params.q - 1.0)
    return out if out.ndim else float(out)


def W_antideriv(l, params: EntropyParams):
    """Antiderivative of :func:`weight` normalised by ``W(0) = 0``; nonpositive."""
    l = np.asarray(l, dtype=float)
    q1 = params.q + 1.0
    out = -(params.c_bar / q1) * _neg_power(l, q1)
    return out if out.ndim else float(out)


def density_from_dual(l, params: EntropyParams):
    """Primal kinetic density carried by the dual value ``l``, equal to ``-W(l)``."""
    l = np.asarray(l, dtype=float)
    q1 = params.q + 1.0
    out = (params.c_bar / q1) * _neg_power(l, q1)
    return out if out.ndim else float(out)


def _neg_power(l: np.ndarray, e: float) -> np.ndarray:
    neg = np.maximum(-l, 0.0)
    if float(e).is_integer():
        return neg ** int(e)
    return neg**e
