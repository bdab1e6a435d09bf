"""Affine matrix inequalities: assembly, reduction and an embedded SDP solver."""
from .expr import Constraint, Expr, LmiError, Problem, Var, blkdiag, bmat, hstack, vstack
from .io import dump_problem, load_problem, problem_from_dict, problem_to_dict
from .kyp import dissipation, kyp_constraint, kyp_expr, snr_frequency_margin
from .reduce import StructureError, structural_kron_reduce
from .solve import FEASIBLE, INCONCLUSIVE, INFEASIBLE, SdpSolution, solve, solve_structured

__all__ = [
    "Constraint", "Expr", "LmiError", "Problem", "Var", "blkdiag", "bmat", "hstack", "vstack",
    "dump_problem", "load_problem", "problem_from_dict", "problem_to_dict",
    "dissipation", "kyp_constraint", "kyp_expr", "snr_frequency_margin",
    "StructureError", "structural_kron_reduce",
    "FEASIBLE", "INCONCLUSIVE", "INFEASIBLE", "SdpSolution", "solve", "solve_structured",
]
