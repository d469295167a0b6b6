"""Membership tests and mapping-theoretic diagnostics for discrete deformations."""

from .composition import (
    CompositionResult,
    NonInvertibleElementError,
    composition_exponents,
    composition_norm_check,
    distortion_operator,
)
from .cov import ChangeOfVariablesResult, PiecewiseConstant, change_of_variable_check, fold_deformation
from .degree import (
    DegenerateConfigurationError,
    banach_indicatrix,
    sense_preserving_check,
    signed_preimage_count,
    topological_degree,
    winding_number,
)
from .distortion import (
    AdmissibilityReport,
    BoundField,
    DistortionField,
    check_class_A,
    check_class_AB,
    distortion_field,
    distortion_from_gradients,
    jacobian_field,
    ls_norm,
)
from .weak import (
    ConvergenceTable,
    RefinementStudy,
    SmoothMap,
    ThetaFunction,
    affine_map,
    bump_map,
    default_test_functions,
    mesh_sequence,
    minor_pairing,
    minor_weak_continuity_test,
    piola_identity_residual,
    quadratic_map,
)

__all__ = [
    "AdmissibilityReport",
    "BoundField",
    "ChangeOfVariablesResult",
    "CompositionResult",
    "ConvergenceTable",
    "DegenerateConfigurationError",
    "DistortionField",
    "NonInvertibleElementError",
    "PiecewiseConstant",
    "RefinementStudy",
    "SmoothMap",
    "ThetaFunction",
    "affine_map",
    "banach_indicatrix",
    "bump_map",
    "change_of_variable_check",
    "check_class_A",
    "check_class_AB",
    "composition_exponents",
    "composition_norm_check",
    "default_test_functions",
    "distortion_field",
    "fold_deformation",
    "distortion_from_gradients",
    "distortion_operator",
    "jacobian_field",
    "ls_norm",
    "mesh_sequence",
    "minor_pairing",
    "minor_weak_continuity_test",
    "piola_identity_residual",
    "quadratic_map",
    "sense_preserving_check",
    "signed_preimage_count",
    "topological_degree",
    "winding_number",
]
