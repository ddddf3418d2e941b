"""Downward translating solitons of the scalar curvature flow in Minkowski space.

Radial profiles, the Riccati comparison oracles, the Dirichlet problem on
convex domains and entire solutions with prescribed behaviour at infinity.
"""
from . import elliptic, entire, geometry, ode_oracles, radial
from .errors import SolitonError

__version__ = "0.1.0"

__all__ = ["elliptic", "entire", "geometry", "ode_oracles", "radial", "SolitonError",
           "__version__"]
