"""Null support functions and completeness criteria for convex spacelike surfaces in R^{2,1}."""
from . import criteria, curvature, families, geodesics, minkowski, support
from .errors import NullSupportError
from .families import make_family
from .support import INF, ExtReal, NullSupportFn

__all__ = ["criteria", "curvature", "families", "geodesics", "minkowski", "support",
           "NullSupportError", "make_family", "INF", "ExtReal", "NullSupportFn"]
__version__ = "0.1.0"
