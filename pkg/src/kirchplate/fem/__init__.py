"""Lagrange finite elements, quadrature, material law and assembly."""
from .assembly import FORMS, assemble, default_rule, vector_symcurl_basis
from .elements import BilinearSquare, LagrangeTriangle, interval_lagrange, reference_element
from .material import MaterialTensor, apply_C, apply_Cinv, cinv_inner
from .quadrature import QuadRule, element_rule, gauss_interval, square_rule, triangle_rule
from .space import FeSpace, eval_symcurl, sym_to_matrix, symcurl_from_gradient

__all__ = [
    "FORMS", "assemble", "default_rule", "vector_symcurl_basis",
    "BilinearSquare", "LagrangeTriangle", "interval_lagrange", "reference_element",
    "MaterialTensor", "apply_C", "apply_Cinv", "cinv_inner",
    "QuadRule", "element_rule", "gauss_interval", "square_rule", "triangle_rule",
    "FeSpace", "eval_symcurl", "sym_to_matrix", "symcurl_from_gradient",
]
