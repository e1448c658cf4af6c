"""Effective Hamiltonians, burning velocities and flame fronts for H(p, x) = |p|^2 + A V(x).p on the 2-torus."""

from .burnvel import (BurningVelocityResult, alpha_level_curve, burning_velocity, detect_flat_pieces,
                      line_integral_check, resonant_directions)
from .cell_solver import HbarResult, SolverConfig, hbar, hbar_discounted, hbar_level_curve, hbar_time_marching, shear_oracle
from .errors import ConfigError, NonConvergenceError, ResonanceError
from .flow import (FlowField, GridFunction, eval_gradient, eval_velocity, make_cats_eye, make_cellular, make_shear,
                   make_shear_cos, make_shear_sin, make_zero)
from .front import AlphaModel, FrontSnapshot, front_consistency, front_trace, hopf_lax_value
from .geometry import FlatArc, LevelCurve
from .perturb import a2, corrector_phi1, diophantine_quality, expansion_residual

__version__ = "0.1.0"
