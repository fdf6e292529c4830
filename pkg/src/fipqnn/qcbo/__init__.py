"""Constrained binary models: expressions, gadgets, network encoding, linearization."""
from .fip import (NetSpec, build_fip_model, decode_int, encode_int, exact_forward,
                  feasible_completion, int_code_values, parameters_from_bits,
                  sample_complexity, spin_report)
from .gadgets import (bounded_coefficients, decode_bits, encode_integer, encode_sign_activation,
                      interval_ineq_to_penalty, linearize_product, linearize_weighted_bilinear,
                      rosenberg_penalty, rosenberg_reduce)
from .linearize import complete_aux, linearize_all
from .midpoint import build_midpoint_qubo_model, grid_midpoints
from .model import Constraint, Expr, QcboModel, VarRegistry, all_assignments, brute_force_model
from .penalty import PenaltyQubo, to_penalty_qubo

__all__ = [
    "NetSpec", "build_fip_model", "decode_int", "encode_int", "exact_forward", "feasible_completion",
    "int_code_values", "parameters_from_bits", "sample_complexity", "spin_report",
    "bounded_coefficients", "decode_bits", "encode_integer", "encode_sign_activation",
    "interval_ineq_to_penalty", "linearize_product", "linearize_weighted_bilinear",
    "rosenberg_penalty", "rosenberg_reduce", "complete_aux", "linearize_all",
    "build_midpoint_qubo_model", "grid_midpoints",
    "Constraint", "Expr", "QcboModel", "VarRegistry", "all_assignments", "brute_force_model",
    "PenaltyQubo", "to_penalty_qubo",
]
