"""Transport-projection kinetic schemes with power-law entropy closure."""
from .basis import PolyBasis, PropertyPParams, check_property_P, eval_basis, eval_dual, preset
from .closure import coeffs_from_moments, moments_from_coeffs, solve_moment_pde, weak_residual
from .config import ConfigError, Scenario, load_scenario, parse_scenario
from .diagnostics import ConvergenceReport, convergence_study, fit_lemma_constants
from .dual_field import DualField, XGrid
from .entropy import EntropyParams, W_antideriv, s_primal, s_star, weight
from .errors import (DegenerateWeight, HypothesisViolation, KinsplitError, NoConvergence,
                     SolverFailure, TailUnbounded)
from .projection import Projector, project_samples
from .scheme import (Problem, SchemeConfig, Trajectory, interpolant_bgk, interpolant_tp, run,
                     step_bgk, step_tp)
from .vquad import VQuadrature, build_quadrature

__version__ = "0.1.0"
