"""Numerical lab for fractional heat semigroups with singular boundary data."""

from ._backend import BACKEND
from .evolution import (TimeDependentData, Trajectory, concentration_sequence, duhamel,
                        elliptic_limit_check, solve_h)
from .green import (dgamma_trace, green_apply, green_kernel, h1_check, martin_apply,
                    martin_kernel, u_star)
from .grid_ops import (DiscreteOperator, GreenKernelMatrix, GreenVariant, Grid, OperatorKind,
                       assemble, build_grid, operator_from_green, synthetic_green)
from .kernel_bounds import envelope, ondiagonal_slope, two_sided_report
from .semigroup import (TruncationError, heat_kernel, resolvent_apply, semigroup_apply,
                        submarkov_check, ultracontractivity_check)
from .spectral import (DegenerateSpectrumError, EigenSystem, NotAdmissibleError, eigendecompose,
                       estimate_sobolev_constant, weyl_check)
from .weakdual import weak_phi_residual, weak_psi_residual

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DegenerateSpectrumError", "DiscreteOperator", "EigenSystem", "GreenKernelMatrix",
    "GreenVariant", "Grid", "NotAdmissibleError", "OperatorKind", "TimeDependentData", "Trajectory",
    "TruncationError", "assemble", "build_grid", "concentration_sequence", "dgamma_trace", "duhamel",
    "eigendecompose", "elliptic_limit_check", "envelope", "estimate_sobolev_constant", "green_apply",
    "green_kernel", "h1_check", "heat_kernel", "martin_apply", "martin_kernel", "ondiagonal_slope",
    "operator_from_green", "resolvent_apply", "semigroup_apply", "solve_h", "submarkov_check",
    "synthetic_green", "two_sided_report", "u_star", "ultracontractivity_check", "weak_phi_residual",
    "weak_psi_residual", "weyl_check",
]
