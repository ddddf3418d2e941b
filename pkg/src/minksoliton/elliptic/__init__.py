"""Dirichlet problem for the soliton equation on convex domains."""
from .discretization import (BOUNDARY_ADJACENT, EXTERIOR, INTERIOR, MASK_NAMES, PINNED,
                             Discretization)
from .domain import Ball, ConvexDomain, GridSpec, LevelSetDomain
from .field import ContinuationSchedule, FieldSolution, load_field
from .monitors import (BarrierReport, MonitorReport, boundary_barrier_check,
                       estimate_monitors)
from .solver import (continuity_solve, discretize_jet, harmonic_lift, initial_field, linearize,
                     newton_solve, parabolic_relax, residual_field, solve_linear)

__all__ = [
    "BOUNDARY_ADJACENT", "EXTERIOR", "INTERIOR", "MASK_NAMES", "PINNED", "Discretization",
    "Ball", "ConvexDomain", "GridSpec", "LevelSetDomain",
    "ContinuationSchedule", "FieldSolution", "load_field",
    "BarrierReport", "MonitorReport", "boundary_barrier_check", "estimate_monitors",
    "continuity_solve", "discretize_jet", "harmonic_lift", "initial_field", "linearize", "newton_solve",
    "parabolic_relax", "residual_field", "solve_linear",
]
