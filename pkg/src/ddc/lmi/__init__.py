"""Structured block LMIs: modelling, lowering, solving and certificate checks."""

from ddc.lmi.conditions import (
    assemble_hinf_lmi,
    assemble_model_hinf,
    assemble_model_robust,
    assemble_robust_lmi,
    model_augmented,
    petersen_sufficient,
)
from ddc.lmi.expr import Affine, BlockLmi, MatrixVariable, MissingAssignment, StructuredMatrix, bmat
from ddc.lmi.solve import (
    DEFAULT_MARGIN,
    LmiSolution,
    Status,
    StructureViolation,
    check_certificate,
    lower,
    solve_feasibility,
    verify_solution,
)

__all__ = [
    "Affine", "BlockLmi", "MatrixVariable", "MissingAssignment", "StructuredMatrix", "bmat",
    "DEFAULT_MARGIN", "LmiSolution", "Status", "StructureViolation", "check_certificate",
    "lower", "solve_feasibility", "verify_solution",
    "assemble_hinf_lmi", "assemble_model_hinf", "assemble_model_robust", "assemble_robust_lmi",
    "model_augmented", "petersen_sufficient",
]
