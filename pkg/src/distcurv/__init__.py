"""Curvature of plane fields in 3-manifold charts, closed-form stretched-metric
formulas checked against a coordinate curvature oracle, and metric
constructions that prescribe the curvature of contact structures."""

__version__ = "0.1.0"

from .expr import ScalarExpr, derive, evaluate, evaluate_many, fd_check, parse_expr
from .fields import (
    Chart,
    Frame,
    GridSpec,
    KernelOfForm,
    MetricField,
    OneForm,
    Span,
    VectorField,
    check_contact,
    check_transverse_pair,
    contact_invariant,
    gram_schmidt_adapted,
    lie_bracket,
    metric_pair,
)
from .framecalc import (
    FrameData,
    StretchCoefficients,
    anisotropic_stretch,
    extract_frame_data,
    k_extrinsic_formula,
    k_gaussian_formula,
    k_sectional_formula,
    stretch_coefficients,
    stretch_metric,
)
from .models import Model, builtin, load_model
from .prescribe import (
    PrescriptionProblem,
    PrescriptionResult,
    find_D,
    find_lambda,
    prescribe,
    prescribe_gaussian,
    prescribe_sectional,
    prescribe_sectional_bicontact,
    rescale_metric,
    solve_pointwise_linear,
    solve_pointwise_quadratic,
    verify_prescription,
)
from .riemann import (
    christoffel,
    covariant_derivative,
    distribution_curvatures,
    second_fundamental_form,
    sectional_oracle,
)
from .estimators import CurvaturePrescriber, DistributionCurvature, check_points

__all__ = [
    "ScalarExpr", "derive", "evaluate", "evaluate_many", "fd_check", "parse_expr",
    "Chart", "Frame", "GridSpec", "KernelOfForm", "MetricField", "OneForm", "Span", "VectorField",
    "check_contact", "check_transverse_pair", "contact_invariant", "gram_schmidt_adapted",
    "lie_bracket", "metric_pair",
    "FrameData", "StretchCoefficients", "anisotropic_stretch", "extract_frame_data",
    "k_extrinsic_formula", "k_gaussian_formula", "k_sectional_formula",
    "stretch_coefficients", "stretch_metric",
    "Model", "builtin", "load_model",
    "PrescriptionProblem", "PrescriptionResult", "find_D", "find_lambda", "prescribe",
    "prescribe_gaussian", "prescribe_sectional", "prescribe_sectional_bicontact",
    "rescale_metric", "solve_pointwise_linear", "solve_pointwise_quadratic", "verify_prescription",
    "christoffel", "covariant_derivative", "distribution_curvatures", "second_fundamental_form",
    "sectional_oracle",
    "CurvaturePrescriber", "DistributionCurvature", "check_points",
]
