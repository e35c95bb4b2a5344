"""Exception hierarchy shared by all subpackages."""

import numpy as np


class HybridFemError(Exception):
    """Base class for every error raised by hybridfem."""


class KinematicsError(HybridFemError):
    """Deformation gradient with non-positive determinant."""


class MaterialError(HybridFemError):
    """Constitutive evaluation at an inadmissible state (I3 <= 0)."""


class MeshError(HybridFemError):
    """Invalid geometry, degenerate element or bad connectivity."""


class ElementError(HybridFemError):
    """Failure while evaluating an element; carries the element index."""

    def __init__(self, element: int, cause: Exception):
        super().__init__(f"element {element}: {cause}")
        self.element = element
        self.cause = cause


class BoundaryConditionError(HybridFemError):
    """Contract violation in a boundary condition definition."""


class SolverDivergence(HybridFemError):
    """Newton iteration failed (singular tangent, NaN, or max_iter)."""


class HomogenizationError(HybridFemError):
    """Microscale solve failed even after sub-stepping."""

    def __init__(self, f_app, message: str):
        super().__init__(f"F_app={np.ravel(f_app).tolist()}: {message}")
        self.f_app = f_app


class SensitivityError(HybridFemError):
    """Sensitivity system could not be solved."""


class GeometryError(HybridFemError):
    """RVE inclusion packing failed."""


class FitError(HybridFemError):
    """Kriging fit failed for all tried hyperparameters."""


class SchemaError(HybridFemError):
    """File does not match the expected schema, version or hash."""


class ComparisonError(HybridFemError):
    """Two solve reports cannot be compared (different load levels)."""
