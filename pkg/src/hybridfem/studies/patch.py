"""Displacement-driven patch tests on the distorted 5-element patch."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SolverDivergence
from ..fem.mesh import Mesh, patch_mesh
from ..fem.problem import BoundaryConditions, FeProblem
from ..fem.solver import run_load_program
from .common import PATCH_L


@dataclass
class PatchResult:
    F: np.ndarray
    S: np.ndarray  # Gauss-point Voigt stresses (n_gp, 3)
    iterations: int
    S_lower: np.ndarray | None = None
    S_upper: np.ndarray | None = None

    @property
    def spread(self) -> float:
        """Largest Gauss-point deviation from the mean stress, relative to its norm."""
        mean = self.S.mean(axis=0)
        dev = np.abs(self.S - mean).max()
        return float(dev / max(np.abs(mean).max(), 1e-300))


def uniaxial_path(values) -> np.ndarray:
    """``F = diag(F11, 1)`` for each ``F11``; shape ``(n, 2, 2)``."""
    v = np.asarray(values, dtype=float)
    F = np.tile(np.eye(2), (len(v), 1, 1))
    F[:, 0, 0] = v
    return F


def multiaxial_path(values) -> np.ndarray:
    """``F = I + (lam - 1) [[1, 1/2], [1/2, 1/2]]`` for each ``lam``."""
    v = np.asarray(values, dtype=float) - 1.0
    G = np.array([[1.0, 0.5], [0.5, 0.5]])
    return np.eye(2) + v[:, None, None] * G


def run_patch_test(F_patch: np.ndarray, law, mesh: Mesh | None = None, steps: int = 4,
                   bands: bool = False) -> PatchResult:
    """Solve the patch with boundary nodes displaced by ``(F_patch - I) X``.

    The prescribed displacement is ramped in ``steps`` equal increments from
    the undeformed state; interior nodes start at zero.
    """
    F_patch = np.asarray(F_patch, dtype=float)
    mesh = mesh if mesh is not None else patch_mesh(PATCH_L)
    bnd = mesh.node_sets["boundary"]
    values = np.zeros((mesh.n_nodes, 2))
    values[bnd] = mesh.nodes[bnd] @ (F_patch - np.eye(2)).T
    bc = BoundaryConditions.from_nodes(bnd, values=values[bnd])
    problem = FeProblem(mesh, law, bc)
    history, report = run_load_program(problem, 1.0, steps, "fixed")
    if not report.completed:
        raise SolverDivergence(f"patch test diverged at load factor {report.steps[-1].load:.4g}")
    u = history.states[-1]
    F, C = problem.kinematics(u)
    C = C.reshape(-1, 3)
    if bands and hasattr(law, "evaluate"):
        ev = law.evaluate(C, bands=True)
        return PatchResult(F_patch, ev.S, report.total_iterations, ev.S_lower, ev.S_upper)
    S, _ = problem.constitutive(C.reshape(F.shape[:2] + (3,)))
    return PatchResult(F_patch, S.reshape(-1, 3), report.total_iterations)


def patch_sweep(path: np.ndarray, law, reference=None, bands: bool = True) -> list[dict]:
    """Patch tests along a path of deformation gradients.

    Args:
        path: ``(n, 2, 2)`` deformation gradients.
        law: constitutive law under test.
        reference: optional callable mapping a triplet ``(F11, F22, F12)`` to
            a reference stress, reported alongside the patch stress.

    Returns:
        One row per path point. A diverged point records its parameter and
        ``converged = False``.
    """
    rows = []
    for F in path:
        row = {"F11": F[0, 0], "F22": F[1, 1], "F12": F[0, 1], "converged": True}
        try:
            res = run_patch_test(F, law, bands=bands)
        except SolverDivergence:
            row["converged"] = False
            rows.append(row)
            continue
        mean = res.S.mean(axis=0)
        row.update({"S11": mean[0], "S22": mean[1], "S12": mean[2], "spread": res.spread})
        if res.S_lower is not None:
            lo, hi = res.S_lower.mean(axis=0), res.S_upper.mean(axis=0)
            row.update({"S11_lo": lo[0], "S22_lo": lo[1], "S12_lo": lo[2],
                        "S11_hi": hi[0], "S22_hi": hi[1], "S12_hi": hi[2]})
        if reference is not None:
            ref = np.asarray(reference(np.array([F[0, 0], F[1, 1], F[0, 1]])))
            row.update({"S11_ref": ref[0], "S22_ref": ref[1], "S12_ref": ref[2]})
        rows.append(row)
    return rows
