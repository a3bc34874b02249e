"""Weak metric structures and the normalized partial Ricci flow on Lie-algebra foliation models."""

from .errors import GfolError
from .lie_model import LieFoliationModel, builtin, check_compatible, load_model, parse_ref
from .ricci_flow import (
    FlowConfig,
    FlowTrajectory,
    ScalarOdeSpec,
    closed_form_mu,
    comparison_closed_form,
    convergence_report,
    integrate_flow,
    limit_metric,
    retract_and_verify,
    scalar_case_i,
)
from .tensor_geometry import geometry_report, levi_civita, partial_ricci_algebraic
from .weak_structures import FramedStructure, classify, induced_structure

__all__ = [
    "GfolError",
    "LieFoliationModel",
    "builtin",
    "check_compatible",
    "load_model",
    "parse_ref",
    "FlowConfig",
    "FlowTrajectory",
    "ScalarOdeSpec",
    "closed_form_mu",
    "comparison_closed_form",
    "convergence_report",
    "integrate_flow",
    "limit_metric",
    "retract_and_verify",
    "scalar_case_i",
    "geometry_report",
    "levi_civita",
    "partial_ricci_algebraic",
    "FramedStructure",
    "classify",
    "induced_structure",
]
