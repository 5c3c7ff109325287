"""Kirchhoff plate bending by regular decomposition into three second-order problems.

The bending moment is written as M = p I + symCurl phi.  A Poisson problem
gives p, a Nitsche-penalized problem on the RT0 quotient gives phi, and a
second Poisson problem gives the deflection w.
"""
from .boundary import (BoundaryGeometry, BoundaryOperators, BoundaryPolyField, ClementProjection,
                       clement_project, extension_trace, filter_field, form_c, form_r, form_s)
from .errors import PlateError
from .fem import FeSpace, MaterialTensor, apply_C, apply_Cinv, assemble, eval_symcurl
from .linalg import BorderedSystem, solve_bordered, solve_spd
from .mesh import BoundaryPartition, Mesh, build_square_mesh, classify_boundary, read_mesh, write_mesh
from .solver import (PlateSolution, coercivity_diagnostic, moment_nn_norm, reconstruct_moments, solve_p,
                     solve_phi, solve_plate, solve_w)
from .verification import ExactSolution, convergence_study, error_norms, solve_exact_constants

__all__ = [
    "BoundaryGeometry", "BoundaryOperators", "BoundaryPolyField", "ClementProjection", "clement_project",
    "extension_trace", "filter_field", "form_c", "form_r", "form_s", "PlateError", "FeSpace",
    "MaterialTensor", "apply_C", "apply_Cinv", "assemble", "eval_symcurl", "BorderedSystem",
    "solve_bordered", "solve_spd", "BoundaryPartition", "Mesh", "build_square_mesh", "classify_boundary",
    "read_mesh", "write_mesh", "PlateSolution", "coercivity_diagnostic", "moment_nn_norm",
    "reconstruct_moments", "solve_p", "solve_phi", "solve_plate", "solve_w", "ExactSolution",
    "convergence_study", "error_norms", "solve_exact_constants",
]
