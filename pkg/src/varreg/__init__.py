"""Direct-method solver and regularity diagnostics for higher-order
one-dimensional variational problems."""

from .admissible import (Basis, BoundarySpec, Polynomial, Trajectory, build_basis, build_lift,
                         eval_trajectory, norms, project)
from .expr import Lagrangian, differentiate, evaluate, parse, to_text
from .mollify import CascadeOptions, MollifiedFunction, cascade, cauchy_check, mollify_value
from .regularity import dbr_fit, dbr_function, degeneracy_scan, recover_highest
from .variational import (Problem, first_variation, gateaux_check, gradient, hessian, objective,
                          solve_critical)

__all__ = [
    "Basis", "BoundarySpec", "Polynomial", "Trajectory", "build_basis", "build_lift",
    "eval_trajectory", "norms", "project", "Lagrangian", "differentiate", "evaluate", "parse",
    "to_text", "CascadeOptions", "MollifiedFunction", "cascade", "cauchy_check", "mollify_value",
    "dbr_fit", "dbr_function", "degeneracy_scan", "recover_highest", "Problem", "first_variation",
    "gateaux_check", "gradient", "hessian", "objective", "solve_critical",
]
