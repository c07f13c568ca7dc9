"""Halo-orbit bifurcation thresholds at the collinear points of the spatial CR3BP.

Thresholds come from a resonant Birkhoff normal form on the center manifold
and are checked against continuation of the planar Lyapunov family.
"""

from .cr3bp_model import MU_EARTH_MOON, MU_SUN_BARYCENTER, ProblemSpec
from .normal_form import ResonantNormalForm, cm_coefficients, compute_normal_form
from .bifurcation import first_order_thresholds, threshold_record, threshold_series
from .diagnostics import convergence_report
from .oracle import IntegratorConfig, numerical_threshold

__version__ = "0.1.0"

__all__ = [
    "MU_EARTH_MOON", "MU_SUN_BARYCENTER", "ProblemSpec", "ResonantNormalForm",
    "cm_coefficients", "compute_normal_form", "first_order_thresholds", "threshold_record",
    "threshold_series", "convergence_report", "IntegratorConfig", "numerical_threshold",
]
