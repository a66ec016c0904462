"""Crank-Nicolson and ADI solvers for space-fractional advection-diffusion."""
from .core_model import (AxisSpec, Field, FracOrder, Problem, SeparableForcing, TimeSpec,
                         build_mesh, sample_field, sample_forcing)
from .errors import (FracAdiError, InadmissibleSchemeError, NonFiniteFieldError, OracleSizeError,
                     RichardsonError, SingularMatrixError, StepFailure)
from .frac_ops import (DirectionOperator, FracCoeffs, advection_matrix, apply_left_frac,
                       apply_operator, apply_right_frac, build_direction_operator, frac_coeffs,
                       left_matrix, solve_lines)
from .splitting import SchemeKind, SteppingState, run

__version__ = "0.1.0"
