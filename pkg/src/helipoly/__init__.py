"""Helical polygons evolving under the Schrodinger map flow in Minkowski 3-space."""

from .errors import HelipolyError
from .mink import (CausalClass, causal_class, lorentz_rotation, mink_cross, mink_dot,
                   renormalize_h2)
from .polygon import CurveState, PolygonKind, PolygonSpec, sample_initial

__all__ = [
    "HelipolyError", "CausalClass", "causal_class", "lorentz_rotation", "mink_cross",
    "mink_dot", "renormalize_h2", "CurveState", "PolygonKind", "PolygonSpec", "sample_initial",
]
