"""Bound-preserving exponential time differencing for convective Allen-Cahn.

First and second order ETD schemes with upwind convection and nonlinear
mobility that preserve the maximum bound of the phase variable for any time
step size. The package provides the spatial operators, Krylov phi-function
actions, the two time steppers, convergence/bound experiment drivers, and a
small CLI.
"""

__version__ = "0.1.0"

from .grid import (  # noqa: F401
    BoundaryCondition,
    Field,
    Grid,
    build_grid,
    lshape_mask,
    sample_function,
    sup_norm,
)
