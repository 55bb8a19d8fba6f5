"""Simulation and verification of nonholonomic systems on Lie groups with
advected parameters.

Layers:

- `linalg`: small dense kernels (subspaces, annihilators, projections)
- `liealg`: Lie algebras, representations, semidirect products, group states
- `constraints`: parameter-dependent constraint families g^Delta(a)
- `diracgeom`: linear Dirac structures and reduced membership tests
- `dynamics`: implicit midpoint integration of the reduced equations,
  Hamiltonian-side twin, reference oracle, reconstruction
- `models`: built-in rigid-body systems
- `cli`: scenario runner
"""

from . import constraints, diracgeom, dynamics, liealg, linalg, models
from .constraints import ConstraintFamily, RankDrop, SingularContact
from .dynamics import (HamiltonianSpec, LagrangianSpec, NewtonDiverged,
                       NotHyperregular, ReducedState, ReducedSystem,
                       Trajectory, integrate, legendre, lps_integrate,
                       oracle_rk4, reconstruct)

__version__ = "1.0.0"

__all__ = [
    "constraints", "diracgeom", "dynamics", "liealg", "linalg", "models",
    "ConstraintFamily", "RankDrop", "SingularContact",
    "HamiltonianSpec", "LagrangianSpec", "NewtonDiverged", "NotHyperregular",
    "ReducedState", "ReducedSystem", "Trajectory",
    "integrate", "legendre", "lps_integrate", "oracle_rk4", "reconstruct",
    "__version__",
]
