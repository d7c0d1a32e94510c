"""Cubic integrable operators for the KPZ and periodic KPZ fixed points."""

from .geometry import build_kpz_contours, build_periodic_sets, solve_bethe_roots
from .operator import Discretization, OperatorSpec, build_operator
from .fredholm import Moments, det_id_minus, moments
from .kernels import BACKEND

__all__ = [
    "BACKEND",
    "Discretization",
    "Moments",
    "OperatorSpec",
    "build_kpz_contours",
    "build_operator",
    "build_periodic_sets",
    "det_id_minus",
    "moments",
    "solve_bethe_roots",
]

__version__ = "0.1.0"
