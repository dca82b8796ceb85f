"""Numerical laboratory for sharp norm inequalities and Sturm-Liouville best constants."""

from .errors import NormLabError
from .function_space import Grid, GridFunction, GridKind, Weight, derivative, integrate, lp_norm
from .report import InequalityReport, Verdict
from .inequality_catalog import InequalityCase, estimate_constant, hl_extremal, known_constant, verify
from .operator_lab import Operator, OperatorClass, kato_check, symmetric_check, interpolation_check
from .sturm_liouville import SLCoefficients, m_function, theta0_search
from .bessel_example import BesselParams, BoundaryData, m_closed_form, normalized_system

__version__ = "0.1.0"

__all__ = [
    "NormLabError",
    "Grid",
    "GridFunction",
    "GridKind",
    "Weight",
    "derivative",
    "integrate",
    "lp_norm",
    "InequalityReport",
    "Verdict",
    "InequalityCase",
    "estimate_constant",
    "hl_extremal",
    "known_constant",
    "verify",
    "Operator",
    "OperatorClass",
    "kato_check",
    "symmetric_check",
    "interpolation_check",
    "SLCoefficients",
    "m_function",
    "theta0_search",
    "BesselParams",
    "BoundaryData",
    "m_closed_form",
    "normalized_system",
]
