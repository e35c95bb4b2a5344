"""Representative volume element: geometry, microscale solves, homogenization.

The RVE is a square of side ``side`` with ``n_inclusions`` equal circular
inclusions placed by seeded rejection sampling. It is meshed with a
structured grid of linear triangles whose material is decided by a
centroid-in-circle test. Boundary displacements follow ``u = (F_app - I) X``.
The homogenized tangent is obtained from a sensitivity analysis that
reuses the factorized microscale tangent.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import BoundaryConditionError, ElementError, GeometryError, HomogenizationError, SensitivityError
from .fem.element import deformation_gradient
from .fem.mesh import Mesh
from .fem.problem import BoundaryConditions, FeProblem
from .fem.solver import newton_solve
from .mechanics import (
    F_COMPONENTS,
    INCLUSION_PARAMS,
    MATRIX_PARAMS,
    MicroMaterial,
    MicroMaterialParams,
    first_elasticity,
    right_cauchy_green,
    symmetrize_tangent,
    tensor_to_voigt,
    voigt_to_tensor,
)

logger = logging.getLogger(__name__)

MATRIX, INCLUSION = 0, 1
MIN_SUBSTEP = 1.0 / 128.0
BACKTRACK = 8


@dataclass(frozen=True)
class RveSpec:
    side: float = 1.0
    n_inclusions: int = 20
    volume_fraction: float = 0.2
    matrix: MicroMaterialParams = MATRIX_PARAMS
    inclusion: MicroMaterialParams = INCLUSION_PARAMS
    seed: int = 0
    target_elements: int = 7800

    @property
    def radius(self) -> float:
        if self.n_inclusions == 0:
            return 0.0
        return self.side * np.sqrt(self.volume_fraction / (self.n_inclusions * np.pi))

    @property
    def grid(self) -> int:
        """Cells per side of the triangulated background grid (2 triangles per cell)."""
        return max(1, int(round(np.sqrt(self.target_elements / 2.0))))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["matrix"] = self.matrix.as_list()
        d["inclusion"] = self.inclusion.as_list()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RveSpec":
        d = dict(d)
        for key in ("matrix", "inclusion"):
            if key in d and not isinstance(d[key], MicroMaterialParams):
                d[key] = MicroMaterialParams(*d[key])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def inclusion_layout(spec: RveSpec, max_attempts: int = 200_000) -> tuple[np.ndarray, float]:
    """Centres ``(n_in, 2)`` and radius of non-overlapping interior inclusions.

    Centres keep a mutual distance of at least ``2.1 r`` and a wall clearance
    of ``0.05 r``.
    """
    r = spec.radius
    if spec.n_inclusions == 0:
        return np.zeros((0, 2)), 0.0
    lo, hi = 1.05 * r, spec.side - 1.05 * r
    if hi <= lo:
        raise GeometryError("inclusions do not fit in the RVE")
    rng = np.random.default_rng(spec.seed)
    centres: list[np.ndarray] = []
    attempts = 0
    while len(centres) < spec.n_inclusions:
        attempts += 1
        if attempts > max_attempts:
            raise GeometryError(f"placed only {len(centres)} of {spec.n_inclusions} inclusions "
                                f"after {max_attempts} attempts")
        c = rng.uniform(lo, hi, size=2)
        if all(np.linalg.norm(c - o) >= 2.1 * r for o in centres):
            centres.append(c)
    return np.array(centres), r


def generate_rve(spec: RveSpec) -> Mesh:
    """Triangulated square with matrix/inclusion tags; deterministic per seed."""
    n = spec.grid
    ell = spec.side
    x = np.linspace(0.0, ell, n + 1)
    X, Y = np.meshgrid(x, x)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    nid = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    a, b = nid[:-1, :-1], nid[:-1, 1:]
    c, d = nid[1:, 1:], nid[1:, :-1]
    # alternate the diagonal in a checkerboard to avoid a directional bias
    flip = (np.add.outer(np.arange(n), np.arange(n)) % 2).astype(bool)
    t1 = np.where(flip[..., None], np.stack([a, b, d], -1), np.stack([a, b, c], -1))
    t2 = np.where(flip[..., None], np.stack([b, c, d], -1), np.stack([a, c, d], -1))
    elements = np.concatenate([t1.reshape(-1, 3), t2.reshape(-1, 3)])
    centres, r = inclusion_layout(spec)
    centroid = nodes[elements].mean(axis=1)
    tags = np.full(len(elements), MATRIX)
    if len(centres):
        dist = np.linalg.norm(centroid[:, None, :] - centres[None, :, :], axis=-1)
        tags[np.any(dist < r, axis=1)] = INCLUSION
    mesh = Mesh(nodes, elements, tags)
    mesh.node_sets["boundary"] = mesh.boundary_nodes()
    mesh.validate()
    return mesh


def applied_deformation_bc(F_app: np.ndarray, mesh: Mesh, symmetric: bool = True) -> BoundaryConditions:
    """Affine displacements ``(F_app - I) X`` on every boundary node."""
    F_app = np.asarray(F_app, dtype=float)
    if symmetric and abs(F_app[0, 1] - F_app[1, 0]) > 1e-14:
        raise BoundaryConditionError("applied deformation must be symmetric (F12 = F21)")
    det = F_app[0, 0] * F_app[1, 1] - F_app[0, 1] * F_app[1, 0]
    if not det > 0:
        raise BoundaryConditionError("applied deformation must have positive determinant")
    nodes = mesh.node_sets.get("boundary")
    if nodes is None:
        nodes = mesh.boundary_nodes()
    u = mesh.nodes[nodes] @ (F_app - np.eye(2)).T
    return BoundaryConditions.from_nodes(nodes, values=u)


def average_fields(problem: FeProblem, u: np.ndarray):
    """Volume averages ``(F_avg, P_avg)`` over the reference domain."""
    F, C = problem.kinematics(u)
    S, _ = problem.constitutive(C)
    P = F @ voigt_to_tensor(S)
    w = problem.geometry.weight
    V = w.sum()
    return (np.einsum("eg,egij->ij", w, F) / V, np.einsum("eg,egij->ij", w, P) / V)


def second_from_first(A: np.ndarray, F: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Voigt material tangent from the first elasticity tensor.

    ``D_AJBL = Finv_Ai Finv_Bk (A_iJkL - delta_ik S_JL)``, then reduced to Voigt
    form by averaging minor-symmetric pairs and symmetrized.
    """
    from .mechanics import expand_first_elasticity

    F = np.asarray(F, dtype=float)
    if not np.linalg.det(F) > 0:
        raise HomogenizationError(F.ravel(), "singular or inverted averaged deformation")
    Fi = np.linalg.inv(F)
    A4 = expand_first_elasticity(A)
    S2 = voigt_to_tensor(S)
    D4 = np.einsum("Ai,Bk,iJkL->AJBL", Fi, Fi, A4 - np.einsum("ik,JL->iJkL", np.eye(2), S2))
    pairs = (((0, 0),), ((1, 1),), ((0, 1), (1, 0)))
    D = np.empty((3, 3))
    for a, pa in enumerate(pairs):
        for b, pb in enumerate(pairs):
            D[a, b] = np.mean([D4[i, j, k, l] for i, j in pa for k, l in pb])
    return symmetrize_tangent(D)


def hill_mandel_gap(problem: FeProblem, u: np.ndarray, du: np.ndarray) -> float:
    """Relative gap between ``<P : Grad du>`` and ``P_avg : <Grad du>``.

    ``du`` must be kinematically admissible: affine on the boundary plus any
    fluctuation vanishing there. The gap is zero at equilibrium.
    """
    F, C = problem.kinematics(u)
    S, _ = problem.constitutive(C)
    P = F @ voigt_to_tensor(S)
    geom = problem.geometry
    dF = deformation_gradient(geom, du.reshape(-1, 2)[problem.mesh.elements]) - np.eye(2)
    w = geom.weight
    V = w.sum()
    micro = np.einsum("eg,egij,egij->", w, P, dF) / V
    P_avg = np.einsum("eg,egij->ij", w, P) / V
    dF_avg = np.einsum("eg,egij->ij", w, dF) / V
    macro = float(np.sum(P_avg * dF_avg))
    scale = np.linalg.norm(P_avg) * np.linalg.norm(dF_avg)
    return abs(micro - macro) / max(scale, 1e-300)


@dataclass
class HomogenizedPoint:
    """Homogenized response at one applied deformation."""

    f_app: np.ndarray
    C: np.ndarray
    S: np.ndarray
    D: np.ndarray
    P_avg: np.ndarray = field(repr=False, default=None)
    F_avg: np.ndarray = field(repr=False, default=None)
    A: np.ndarray = field(repr=False, default=None)
    iterations: int = 0
    substeps: int = 1


class Homogenizer:
    """Owns one RVE mesh and its FE problem; not shared between threads."""

    def __init__(self, spec: RveSpec, mesh: Mesh | None = None):
        self.spec = spec
        self.mesh = mesh if mesh is not None else generate_rve(spec)
        laws = {MATRIX: MicroMaterial(spec.matrix), INCLUSION: MicroMaterial(spec.inclusion)}
        bnd = self.mesh.node_sets["boundary"]
        bc = BoundaryConditions.from_nodes(bnd)
        self.problem = FeProblem(self.mesh, laws, bc)
        self.boundary = bnd
        self.volume = float(self.problem.geometry.weight.sum())
        self._ref = None
        # D u_bc / D vec(F): boundary dof 2n+i responds to F_iJ with X_J
        X = self.mesh.nodes[bnd]
        self.dubc = np.zeros((2 * len(bnd), 4))
        for q, (i, J) in enumerate(F_COMPONENTS):
            self.dubc[i::2, q] = X[:, J]

    def boundary_values(self, F: np.ndarray) -> np.ndarray:
        return (self.mesh.nodes[self.boundary] @ (F - np.eye(2)).T).ravel()

    @staticmethod
    def _fvec(F: np.ndarray) -> np.ndarray:
        return np.array([F[i, J] for i, J in F_COMPONENTS])

    def _reference_state(self):
        """Factorized tangent at the undeformed state, shared by all first predictors."""
        if self._ref is None:
            self.problem.set_dirichlet_values(np.zeros(len(self.problem.fixed)))
            self._ref = newton_solve(self.problem, 1.0, np.zeros(self.mesh.n_dofs), keep_factor=True)
        return self._ref

    def _predict(self, state, u: np.ndarray, dF: np.ndarray) -> np.ndarray:
        """Tangent predictor, pulled back toward ``u`` while it inverts an element."""
        step = self.sensitivity(state) @ self._fvec(dF)
        fixed = self.problem.fixed
        for _ in range(BACKTRACK + 1):
            guess = u + step
            try:
                self.problem.kinematics(guess)
                return guess
            except ElementError:
                free_part = step.copy()
                free_part[fixed] = 0.0
                step -= 0.5 * free_part
        return guess

    def solve(self, F_app: np.ndarray):
        """Equilibrium under ``(F_app - I) X``.

        The path ``I + t (F_app - I)`` is followed from ``t = 0``; a diverged
        increment is bisected (down to ``MIN_SUBSTEP``) and the increment grows
        back after each success. Every sub-step starts from a tangent predictor.

        Returns:
            ``(result, iterations, substeps)`` with the factorized tangent kept.
        """
        F_app = np.asarray(F_app, dtype=float)
        G = F_app - np.eye(2)
        state = self._reference_state()
        u = np.zeros(self.mesh.n_dofs)
        t, dt = 0.0, 1.0
        total, substeps = 0, 0
        while t < 1.0:
            dt = min(dt, 1.0 - t)
            guess = self._predict(state, u, dt * G)
            self.problem.set_dirichlet_values(self.boundary_values(np.eye(2) + (t + dt) * G))
            res = newton_solve(self.problem, 1.0, guess, keep_factor=True,
                               backtrack=BACKTRACK, line_search=True)
            total += res.iterations
            if res.converged:
                t += dt
                u, state = res.u, res
                substeps += 1
                dt *= 2.0
                continue
            logger.debug("micro increment %.4g at t=%.4g failed: %s", dt, t, res.message)
            dt *= 0.5
            if dt < MIN_SUBSTEP:
                raise HomogenizationError(F_app.ravel(), f"microscale divergence at path fraction {t:.4g} "
                                                         f"({res.message})")
        return state, total, substeps

    def sensitivity(self, res) -> np.ndarray:
        """``d u / d vec(F_app)`` for all dofs, shape ``(n_dofs, 4)``."""
        if res.lu is None:
            raise SensitivityError("no factorized tangent available")
        rhs = -(res.K_fp @ self.dubc)
        du_free = res.lu.solve(np.ascontiguousarray(rhs))
        if not np.all(np.isfinite(du_free)):
            raise SensitivityError("non-finite sensitivity")
        du = np.zeros((self.mesh.n_dofs, 4))
        du[self.problem.free] = du_free
        du[self.problem.fixed] = self.dubc
        return du

    def first_elasticity(self, u: np.ndarray, du: np.ndarray) -> np.ndarray:
        """Averaged ``dP/d vec(F_app)`` as a 4x4 matrix."""
        F, C = self.problem.kinematics(u)
        S, D = self.problem.constitutive(C)
        A_gp = first_elasticity(F, S, D)  # (ne, ngp, 4, 4)
        geom = self.problem.geometry
        w = geom.weight
        out = np.zeros((4, 4))
        for q in range(4):
            due = du[:, q].reshape(-1, 2)[self.mesh.elements]
            dF = deformation_gradient(geom, due) - np.eye(2)
            dFv = np.stack([dF[..., i, J] for i, J in F_COMPONENTS], axis=-1)
            dP = np.einsum("egpq,egq->egp", A_gp, dFv)
            out[:, q] = np.einsum("eg,egp->p", w, dP) / self.volume
        return out

    def homogenize(self, F_app: np.ndarray, symmetric: bool = True) -> HomogenizedPoint:
        F_app = np.asarray(F_app, dtype=float)
        applied_deformation_bc(F_app, self.mesh, symmetric=symmetric)  # contract checks
        res, iterations, m = self.solve(F_app)
        F_avg, P_avg = average_fields(self.problem, res.u)
        S_full = np.linalg.solve(F_avg, P_avg)
        S = tensor_to_voigt(S_full)
        A = self.first_elasticity(res.u, self.sensitivity(res))
        D = second_from_first(A, F_avg, S)
        return HomogenizedPoint(
            f_app=np.array([F_app[0, 0], F_app[1, 1], F_app[0, 1]]),
            C=right_cauchy_green(F_app), S=S, D=D, P_avg=P_avg, F_avg=F_avg, A=A,
            iterations=iterations, substeps=m)


def homogenize(F_app: np.ndarray, spec: RveSpec) -> HomogenizedPoint:
    """One-shot convenience wrapper; builds the RVE for every call."""
    return Homogenizer(spec).homogenize(F_app)


_WORKER: Homogenizer | None = None


def _init_worker(spec_dict: dict) -> None:
    global _WORKER
    _WORKER = Homogenizer(RveSpec.from_dict(spec_dict))


def _work(F: np.ndarray) -> HomogenizedPoint:
    return _WORKER.homogenize(F)


def homogenize_many(F_list, spec: RveSpec, workers: int | None = None,
                    homogenizer: Homogenizer | None = None) -> list[HomogenizedPoint]:
    """Homogenize many applied deformations, preserving input order.

    Runs in worker processes (each owning its own RVE) when ``workers > 1``.
    """
    F_list = [np.asarray(F, dtype=float) for F in F_list]
    workers = workers or int(os.environ.get("HYBRIDFEM_WORKERS", os.cpu_count() or 1))
    if workers <= 1 or len(F_list) < 2:
        h = homogenizer or Homogenizer(spec)
        return [h.homogenize(F) for F in F_list]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(spec.to_dict(),)) as pool:
        return list(pool.map(_work, F_list, chunksize=max(1, len(F_list) // (4 * workers))))
