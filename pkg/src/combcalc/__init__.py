"""combcalc: contour calculus over sector-minus-comb domains.

Builds comb-shaped excisions around sector rays so that weighted resolvent
integrals of quasinilpotent operators converge, evaluates those integrals by
adaptive quadrature, and certifies non-comparability of the resulting
invariant-subspace pairs.
"""

from .geometry import (
    Arc,
    BoundaryAmbiguousError,
    CombPlacement,
    CombSet,
    Contour,
    Domain,
    GeometryError,
    Sector,
    Segment,
    build_boundary_contour,
    chord_arc_constant,
    circle_contour,
    dyadic_schedule,
    point_in_domain,
    polygon_contour,
    sector_domain,
    winding_number,
)
from .operators import (
    Operator,
    OperatorError,
    PoleError,
    apply_resolvent,
    catalog_kinds,
    dense_resolvent_norm,
    make_operator,
    resolvent_defect,
    resolvent_identity_residual,
    weighted_operator_norm,
)
from .calculus import (
    CalculusError,
    QuadOptions,
    QuadratureError,
    TruncationError,
    UnboundedIntegrandError,
    WeightFunction,
    operator_contour_integral,
    quadrature_self_test,
    translation_weight,
)
from .probe import (
    GrowthFitError,
    GrowthModel,
    ProbeError,
    ResolventSample,
    check_unboundedness_hypothesis,
    estimate_resolvent_norm,
    fit_growth_model,
    power_bounded_checks,
)
from .combs import (
    CombBudget,
    CombBuildError,
    build_comb_set,
    comb_report_json,
    rectangle_certificates,
    validate_comb_set,
)
from .certify import (
    Certificate,
    CertifyError,
    OperatorIntegral,
    SubspacePair,
    annihilation_residual,
    certificate_to_json,
    containment_sines,
    deformation_residual,
    densify_operator,
    extract_subspaces,
    kernel_membership_test,
    non_comparability_check,
    power_identity_residual,
    product_formula_residual,
    run_theorem_pipeline,
    verdict_from_certificate,
)
from .config import ConfigError, RunConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "Arc",
    "BoundaryAmbiguousError",
    "CalculusError",
    "Certificate",
    "CertifyError",
    "CombBudget",
    "CombBuildError",
    "CombPlacement",
    "CombSet",
    "ConfigError",
    "Contour",
    "Domain",
    "GeometryError",
    "GrowthFitError",
    "GrowthModel",
    "Operator",
    "OperatorError",
    "OperatorIntegral",
    "PoleError",
    "ProbeError",
    "QuadOptions",
    "QuadratureError",
    "ResolventSample",
    "RunConfig",
    "Sector",
    "Segment",
    "SubspacePair",
    "TruncationError",
    "UnboundedIntegrandError",
    "WeightFunction",
    "annihilation_residual",
    "apply_resolvent",
    "build_boundary_contour",
    "build_comb_set",
    "catalog_kinds",
    "certificate_to_json",
    "check_unboundedness_hypothesis",
    "chord_arc_constant",
    "circle_contour",
    "comb_report_json",
    "containment_sines",
    "deformation_residual",
    "dense_resolvent_norm",
    "densify_operator",
    "dyadic_schedule",
    "estimate_resolvent_norm",
    "extract_subspaces",
    "fit_growth_model",
    "kernel_membership_test",
    "load_config",
    "make_operator",
    "non_comparability_check",
    "operator_contour_integral",
    "point_in_domain",
    "polygon_contour",
    "power_bounded_checks",
    "power_identity_residual",
    "product_formula_residual",
    "quadrature_self_test",
    "rectangle_certificates",
    "resolvent_defect",
    "resolvent_identity_residual",
    "run_theorem_pipeline",
    "sector_domain",
    "translation_weight",
    "validate_comb_set",
    "verdict_from_certificate",
    "weighted_operator_norm",
    "winding_number",
]
