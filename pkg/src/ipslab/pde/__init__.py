"""Deterministic solvers: the matrix flow, the p* boundary-value problem and the Cauchy problem."""

from .cauchy import (CauchyResult, cauchy_limit, cauchy_solve, gamma_zero_limit_check, limit_class,
                     upper_bound_infinite)
from .flow import DiffMatrixField, FlowResult, PDEError, flow_case, flow_residual, flow_solve
from .pstar import GridFn1D, boundary_identity_gaps, ode_residual, parse_class, pstar_shoot

__all__ = [
    "CauchyResult",
    "cauchy_limit",
    "cauchy_solve",
    "gamma_zero_limit_check",
    "limit_class",
    "upper_bound_infinite",
    "DiffMatrixField",
    "FlowResult",
    "PDEError",
    "flow_case",
    "flow_residual",
    "flow_solve",
    "GridFn1D",
    "boundary_identity_gaps",
    "ode_residual",
    "parse_class",
    "pstar_shoot",
]
