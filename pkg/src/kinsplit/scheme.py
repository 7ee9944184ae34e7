"""Transport-projection splitting and its BGK-type variant.

One step of the plain scheme shifts the previous state by ``h v`` in x and
projects the result back onto E* in the L2 space weighted by ``w(l^{n-1})``.
The BGK variant blends the shifted state towards its E0* projection before
the final projection.  Both projections use the lagged weight ``w(l^{n-1})``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .basis import PolyBasis, PropertyPChecker, PropertyPParams, eval_basis
from .dual_field import (DualField, SampledField, XGrid, interp_all, sup_ball_l2_distance,
                         transport)
from .entropy import EntropyParams
from .errors import HypothesisViolation, KinsplitError
from .projection import EPS_GRAM, TOL_PROJ, Projector, conservation_residual
from .vquad import VQuadrature


@dataclass(frozen=True)
class SchemeConfig:
    variant: Literal["transport_projection", "bgk"] = "transport_projection"
    h: float = 0.01
    T: float = 0.2
    guard: PropertyPParams | None = None
    tol_proj: float = TOL_PROJ
    eps_gram: float = EPS_GRAM
    ledger_on: bool = True
    guard_stride: int = 1
    initial_delta1: float | None = None  # bound on sup_x int_{B_R} |l0 - lbar|^2

    def __post_init__(self):
        if self.variant not in ("transport_projection", "bgk"):
            raise ValueError(f"unknown scheme variant {self.variant!r}")
        if not 0 < self.h <= 1:
            raise ValueError("time step h must lie in (0, 1]")
        if self.variant == "bgk" and not self.h < 1:
            raise ValueError("the BGK blend needs h < 1")
        if not self.T > 0:
            raise ValueError("final time T must be positive")
        if self.guard_stride < 1:
            raise ValueError("guard stride must be at least 1")

    @property
    def n_steps(self) -> int:
        # guard against T/h landing a hair above an integer
        return math.ceil(self.T / self.h - 1e-9)


@dataclass
class Problem:
    """Everything fixed during a run: entropy, basis, grids, reference state."""
    params: EntropyParams
    basis: PolyBasis
    grid: XGrid
    quad: VQuadrature
    lbar: np.ndarray  # reference coefficients

    def __post_init__(self):
        self.lbar = np.asarray(self.lbar, dtype=float)
        if self.lbar.shape != (self.basis.k,):
            raise ValueError("reference state must have one coefficient per basis element")

    @property
    def lbar_field(self) -> DualField:
        return DualField.constant(self.grid, self.basis, self.lbar)


@dataclass
class Trajectory:
    problem: Problem
    config: SchemeConfig
    states: list[DualField]
    checks: list[DualField] = field(default_factory=list)  # BGK: E0* projections per step
    ledger: list[dict] = field(default_factory=list)
    abort: KinsplitError | None = None

    @property
    def completed(self) -> bool:
        return self.abort is None and len(self.states) == self.config.n_steps + 1

    @property
    def h(self) -> float:
        return self.config.h

    def raise_if_aborted(self):
        if self.abort is not None:
            raise self.abort


class Stepper:
    """Holds the per-run machinery (projector, guard) shared by all steps."""

    def __init__(self, problem: Problem, config: SchemeConfig):
        self.problem, self.config = problem, config
        self.projector = Projector(problem.basis, problem.quad, problem.params,
                                   config.tol_proj, config.eps_gram, reference=problem.lbar)
        self.guard = None if config.guard is None else PropertyPChecker(problem.basis, config.guard)

    def step(self, l_prev: DualField, h: float) -> tuple[DualField, DualField | None, dict]:
        """Advance one step; returns (l_next, E0* projection or None, step info).

        Projections act on deviations from the reference state (which lies in
        E* and is a fixed point of every projection), so small perturbations
        keep their relative precision.
        """
        quad = self.problem.quad
        lbar = self.problem.lbar_field
        lbar_v = lbar.nodal(quad)
        hat_dev = transport(l_prev - lbar, h, quad).values
        w = self.projector.weights_of(l_prev)
        pi0 = None
        if self.config.variant == "bgk":
            if self._lbar_in_e0:
                pi0_dev = self.projector.project(hat_dev, w, "e0")
                pi0_g = pi0_dev + self.problem.lbar
            else:
                pi0_g = self.projector.project(hat_dev + lbar_v, w, "e0")
            pi0 = DualField.from_points(l_prev.grid, l_prev.basis, pi0_g)
            target_dev = (1.0 - h) * hat_dev + h * (pi0 - lbar).nodal(quad)
        else:
            target_dev = hat_dev
        gamma = self.projector.project(target_dev, w, "full") + self.problem.lbar
        l_next = DualField.from_points(l_prev.grid, l_prev.basis, gamma)
        hat = SampledField(l_prev.grid, quad, hat_dev + lbar_v)
        return l_next, pi0, {"hat": hat, "target": target_dev + lbar_v, "weight": w,
                             "target_dev": target_dev}

    @property
    def _lbar_in_e0(self) -> bool:
        e0 = self.problem.basis.e0_indices
        if e0 is None:
            return False
        outside = np.delete(self.problem.lbar, list(e0))
        return bool(np.all(outside == 0))

    def check_guard(self, state: DualField, step: int) -> np.ndarray | None:
        if self.guard is None:
            return None
        rep = self.guard(state.per_point)
        if not np.all(rep.holds):
            j = int(np.flatnonzero(~np.asarray(rep.holds))[0])
            raise HypothesisViolation(
                f"property P fails at step {step}, grid point {j} (margins {rep.margins[j]})",
                step=step, index=j)
        return rep.margins.min(axis=0)


def step_tp(l_prev: DualField, h: float, problem: Problem, config: SchemeConfig | None = None) -> DualField:
    config = config or SchemeConfig()
    if h == 0:
        return l_prev
    return Stepper(problem, _with_variant(config, "transport_projection")).step(l_prev, h)[0]


def step_bgk(l_prev: DualField, h: float, problem: Problem,
             config: SchemeConfig | None = None) -> tuple[DualField, DualField]:
    """Returns ``(l_next, pi0)``; the blend target is ``(1-h) l_prev(x-hv, v) + h pi0``."""
    if not 0 <= h < 1:
        raise ValueError("BGK step needs 0 <= h < 1")
    config = config or SchemeConfig(variant="bgk")
    l_next, pi0, _ = Stepper(problem, _with_variant(config, "bgk")).step(l_prev, h)
    return l_next, pi0


def _with_variant(config: SchemeConfig, variant: str) -> SchemeConfig:
    if config.variant == variant:
        return config
    from dataclasses import replace
    return replace(config, variant=variant)


def run(config: SchemeConfig, l0: DualField, problem: Problem) -> Trajectory:
    """Iterate the selected scheme to ``ceil(T/h)`` steps.

    The initial state is checked first and a violation raises immediately.
    Aborts during the run are stored in ``Trajectory.abort`` with the partial
    sequence of states retained.
    """
    from .diagnostics import ledger_initial, ledger_step

    stepper = Stepper(problem, config)
    if l0.basis != problem.basis or l0.grid != problem.grid:
        raise ValueError("initial field does not match the problem's basis and grid")
    margins = stepper.check_guard(l0, 0)
    if config.initial_delta1 is not None and config.guard is not None:
        dist = sup_ball_l2_distance(l0, problem.lbar_field, problem.quad, config.guard.R)
        if dist > config.initial_delta1:
            raise HypothesisViolation(
                f"initial data too far from the reference state ({dist:.3e} > "
                f"{config.initial_delta1:.3e})", step=0)
    traj = Trajectory(problem, config, [l0])
    if config.ledger_on:
        traj.ledger.append(ledger_initial(l0, problem, config, margins))
    h = config.h
    lv = stepper.projector.lv
    for n in range(1, config.n_steps + 1):
        t0 = time.perf_counter()
        prev = traj.states[-1]
        try:
            l_next, pi0, info = stepper.step(prev, h)
            margins = None
            if n % config.guard_stride == 0 or n == config.n_steps:
                margins = stepper.check_guard(l_next, n)
        except KinsplitError as err:
            if err.step is None:
                err.step = n
            traj.abort = err
            return traj
        traj.states.append(l_next)
        if pi0 is not None:
            traj.checks.append(pi0)
        if config.ledger_on:
            cons = conservation_residual(l_next.nodal(problem.quad), info["target"], info["weight"],
                                         lv, problem.quad)
            rec = ledger_step(prev, l_next, info, problem, config, n)
            rec["conservation_residual"] = float(cons.max())
            rec["propertyP_margins"] = None if margins is None else [float(m) for m in margins]
            rec["wall_time"] = time.perf_counter() - t0
            traj.ledger.append(rec)
    return traj


# ---------------------------------------------------------------- interpolants

def _as_points(traj: Trajectory, x, t, v):
    d = traj.problem.grid.d_x
    x = np.asarray(x, float).reshape(-1, d)
    v = np.asarray(v, float).reshape(-1, traj.problem.basis.d)
    t = np.broadcast_to(np.asarray(t, float), (len(x),))
    return x, t, v


def _field_at(state: DualField, x: np.ndarray, lv: np.ndarray) -> np.ndarray:
    return np.einsum("mk,mk->m", interp_all(state, x), lv)


def _locate(traj: Trajectory, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = traj.h
    n_done = len(traj.states) - 1
    if np.any(t < 0) or np.any(t > n_done * h * (1 + 1e-12)):
        raise ValueError(f"time outside [0, {n_done * h}]")
    n = np.minimum(np.floor(t / h).astype(int), max(n_done - 1, 0))
    return n, t - n * h


def interpolant_tp(traj: Trajectory, x, t, v) -> np.ndarray:
    """Continuous-in-time interpolant: double-speed transport on the first half
    step, then a linear blend towards the next state."""
    x, t, v = _as_points(traj, x, t, v)
    lv = eval_basis(traj.problem.basis, v).reshape(len(x), -1)
    if len(traj.states) == 1:
        return _field_at(traj.states[0], x, lv)
    h = traj.h
    n, s = _locate(traj, t)
    out = np.empty(len(x))
    for m in np.unique(n):
        sel = n == m
        first = sel & (s <= h / 2)
        second = sel & (s > h / 2)
        cur = traj.states[m]
        if first.any():
            out[first] = _field_at(cur, x[first] - 2 * s[first, None] * v[first], lv[first])
        if second.any():
            a = 2 * ((m + 1) * h - t[second]) / h
            nxt = _field_at(traj.states[m + 1], x[second], lv[second])
            shifted = _field_at(cur, x[second] - h * v[second], lv[second])
            out[second] = (1 - a) * nxt + a * shifted
    return out


def blend_state(traj: Trajectory, n: int, x: np.ndarray, v: np.ndarray, lv: np.ndarray) -> np.ndarray:
    """BGK intermediate state (1-h) l^n(x-hv, v) + h Pi0^n(x, v)."""
    h = traj.h
    return (1 - h) * _field_at(traj.states[n], x - h * v, lv) + h * _field_at(traj.checks[n], x, lv)


def interpolant_bgk(traj: Trajectory, x, t, v) -> np.ndarray:
    """Interpolant in thirds: triple-speed transport, blend to the relaxed
    state, blend to the next projected state."""
    if traj.config.variant != "bgk":
        raise ValueError("trajectory was not produced by the BGK variant")
    x, t, v = _as_points(traj, x, t, v)
    lv = eval_basis(traj.problem.basis, v).reshape(len(x), -1)
    if len(traj.states) == 1:
        return _field_at(traj.states[0], x, lv)
    h = traj.h
    n, s = _locate(traj, t)
    out = np.empty(len(x))
    for m in np.unique(n):
        sel = n == m
        seg1 = sel & (s <= h / 3)
        seg2 = sel & (s > h / 3) & (s <= 2 * h / 3)
        seg3 = sel & (s > 2 * h / 3)
        cur = traj.states[m]
        if seg1.any():
            out[seg1] = _field_at(cur, x[seg1] - 3 * s[seg1, None] * v[seg1], lv[seg1])
        if seg2.any():
            a = 3 * (t[seg2] - (m + 1 / 3) * h) / h
            shifted = _field_at(cur, x[seg2] - h * v[seg2], lv[seg2])
            chk = blend_state(traj, m, x[seg2], v[seg2], lv[seg2])
            out[seg2] = (1 - a) * shifted + a * chk
        if seg3.any():
            a = 3 * (t[seg3] - (m + 2 / 3) * h) / h
            chk = blend_state(traj, m, x[seg3], v[seg3], lv[seg3])
            nxt = _field_at(traj.states[m + 1], x[seg3], lv[seg3])
            out[seg3] = (1 - a) * chk + a * nxt
    return out
