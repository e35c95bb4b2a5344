"""Plane-strain total-Lagrangian finite elements."""

from .mesh import Mesh, compression_mesh, cook_mesh, patch_mesh, rectangle_mesh
from .problem import BoundaryConditions, FeProblem, Traction
from .solver import SolveReport, ipi, newton_solve, run_load_program

__all__ = ["Mesh", "compression_mesh", "cook_mesh", "patch_mesh", "rectangle_mesh",
           "BoundaryConditions", "FeProblem", "Traction",
           "SolveReport", "ipi", "newton_solve", "run_load_program"]
