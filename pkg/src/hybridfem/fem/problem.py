"""Boundary conditions and global assembly."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Protocol

import numpy as np
import scipy.sparse as sp

from ..errors import BoundaryConditionError, ElementError, KinematicsError, MaterialError
from ..mechanics import right_cauchy_green
from .element import deformation_gradient, residual_and_stiffness
from .mesh import Mesh


class ConstitutiveLaw(Protocol):
    def response(self, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Voigt stress ``(n, 3)`` and tangent ``(n, 3, 3)`` at Voigt C ``(n, 3)``."""


@dataclass
class Traction:
    """Dead traction (force per unit reference length) on boundary segments.

    ``interval`` optionally restricts the load to the part of each segment
    whose projection on ``axis`` lies inside ``[lo, hi]``.
    """

    segments: np.ndarray
    vector: np.ndarray
    interval: tuple[float, float] | None = None
    axis: int = 0


@dataclass
class BoundaryConditions:
    """Prescribed dofs scaled by the load factor plus dead tractions.

    ``dirichlet_values`` are the prescribed displacements at load factor 1;
    the value at load factor ``lam`` is ``lam * dirichlet_values``.
    """

    dirichlet_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dirichlet_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tractions: list[Traction] = field(default_factory=list)

    def __post_init__(self):
        self.dirichlet_dofs = np.asarray(self.dirichlet_dofs, dtype=np.int64)
        self.dirichlet_values = np.asarray(self.dirichlet_values, dtype=float)
        if self.dirichlet_values.shape != self.dirichlet_dofs.shape:
            raise BoundaryConditionError("one prescribed value per constrained dof")
        if len(np.unique(self.dirichlet_dofs)) != len(self.dirichlet_dofs):
            raise BoundaryConditionError("dof constrained twice")

    @classmethod
    def from_nodes(cls, nodes: np.ndarray, components=(0, 1), values: np.ndarray | None = None,
                   tractions: list[Traction] | None = None) -> "BoundaryConditions":
        nodes = np.asarray(nodes, dtype=np.int64)
        comps = np.asarray(components, dtype=np.int64)
        dofs = (2 * nodes[:, None] + comps[None, :]).ravel()
        vals = np.zeros(len(dofs)) if values is None else np.asarray(values, dtype=float)[:, comps].ravel()
        return cls(dofs, vals, tractions or [])

    def merged(self, other: "BoundaryConditions") -> "BoundaryConditions":
        return BoundaryConditions(np.concatenate([self.dirichlet_dofs, other.dirichlet_dofs]),
                                  np.concatenate([self.dirichlet_values, other.dirichlet_values]),
                                  self.tractions + other.tractions)


def traction_vector(mesh: Mesh, tractions: list[Traction]) -> np.ndarray:
    """Consistent nodal forces of the dead tractions at load factor 1."""
    f = np.zeros(mesh.n_dofs)
    for tr in tractions:
        t = np.asarray(tr.vector, dtype=float)
        for a, b in np.asarray(tr.segments):
            xa, xb = mesh.nodes[a], mesh.nodes[b]
            length = np.linalg.norm(xb - xa)
            s0, s1 = 0.0, 1.0
            if tr.interval is not None:
                pa, pb = xa[tr.axis], xb[tr.axis]
                if pa == pb:
                    continue
                lo, hi = sorted(((tr.interval[0] - pa) / (pb - pa), (tr.interval[1] - pa) / (pb - pa)))
                s0, s1 = max(0.0, lo), min(1.0, hi)
                if s1 <= s0:
                    continue
            # exact integrals of the linear shape functions over [s0, s1]
            wa = (s1 - s0) - 0.5 * (s1 ** 2 - s0 ** 2)
            wb = 0.5 * (s1 ** 2 - s0 ** 2)
            f[2 * a:2 * a + 2] += t * wa * length
            f[2 * b:2 * b + 2] += t * wb * length
    return f


class _SparsePattern:
    """CSR pattern of a sub-block plus the map from element entries into it."""

    def __init__(self, rows: np.ndarray, cols: np.ndarray, select: np.ndarray, shape: tuple[int, int]):
        r, c = rows[select], cols[select]
        key = r * shape[1] + c
        uniq, inverse = np.unique(key, return_inverse=True)
        self.select = select
        self.inverse = inverse
        self.nnz = len(uniq)
        self.shape = shape
        ur, uc = uniq // shape[1], uniq % shape[1]
        self.indptr = np.concatenate([[0], np.cumsum(np.bincount(ur, minlength=shape[0]))])
        self.indices = uc

    def matrix(self, values: np.ndarray) -> sp.csr_matrix:
        data = np.bincount(self.inverse, weights=values[self.select], minlength=self.nnz)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=self.shape)


class FeProblem:
    """Static hyperelastic problem: mesh, laws per material tag, boundary conditions.

    Assembly is serial and deterministic; the sparse patterns of the free and
    free-prescribed blocks are computed once.
    """

    def __init__(self, mesh: Mesh, laws: ConstitutiveLaw | Mapping[int, ConstitutiveLaw],
                 bc: BoundaryConditions):
        self.mesh = mesh
        self.laws = dict(laws) if isinstance(laws, Mapping) else {int(t): laws for t in np.unique(mesh.tags)}
        missing = set(np.unique(mesh.tags).tolist()) - set(self.laws)
        if missing:
            raise ValueError(f"no constitutive law for tags {sorted(missing)}")
        self.bc = bc
        self.geometry = mesh.geometry
        n = mesh.n_dofs
        if bc.dirichlet_dofs.size and (bc.dirichlet_dofs.min() < 0 or bc.dirichlet_dofs.max() >= n):
            raise BoundaryConditionError("constrained dof out of range")
        self.fixed = bc.dirichlet_dofs
        mask = np.ones(n, dtype=bool)
        mask[self.fixed] = False
        self.free = np.flatnonzero(mask)
        self.f_ext = traction_vector(mesh, bc.tractions)

        nn = mesh.elements.shape[1]
        self.edofs = (2 * mesh.elements[:, :, None] + np.arange(2)).reshape(len(mesh.elements), 2 * nn)
        rows = np.repeat(self.edofs, 2 * nn, axis=1).ravel()
        cols = np.tile(self.edofs, (1, 2 * nn)).ravel()
        pos = np.full(n, -1, dtype=np.int64)
        pos[self.free] = np.arange(len(self.free))
        posp = np.full(n, -1, dtype=np.int64)
        posp[self.fixed] = np.arange(len(self.fixed))
        rf, cf, cp = pos[rows], pos[cols], posp[cols]
        self._pat_ff = _SparsePattern(rf, cf, (rf >= 0) & (cf >= 0), (len(self.free), len(self.free)))
        self._pat_fp = _SparsePattern(rf, cp, (rf >= 0) & (cp >= 0), (len(self.free), len(self.fixed)))
        self._tag_groups = {t: np.flatnonzero(mesh.tags == t) for t in self.laws}

    def set_dirichlet_values(self, values: np.ndarray) -> None:
        """Replace prescribed values on the same constrained dofs."""
        values = np.asarray(values, dtype=float)
        if values.shape != self.fixed.shape:
            raise BoundaryConditionError("prescribed values do not match constrained dofs")
        self.bc.dirichlet_values = values

    def prescribed(self, load: float) -> np.ndarray:
        return load * self.bc.dirichlet_values

    def impose(self, u: np.ndarray, load: float) -> np.ndarray:
        u = np.array(u, dtype=float)
        u[self.fixed] = self.prescribed(load)
        return u

    def element_displacements(self, u: np.ndarray) -> np.ndarray:
        return u.reshape(-1, 2)[self.mesh.elements]

    def kinematics(self, u: np.ndarray):
        """Gauss-point ``F (ne, ngp, 2, 2)`` and Voigt ``C (ne, ngp, 3)``."""
        F = deformation_gradient(self.geometry, self.element_displacements(u))
        try:
            C = right_cauchy_green(F)
        except KinematicsError as exc:
            det = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
            raise ElementError(int(np.argwhere(~(det > 0))[0, 0]), exc) from exc
        return F, C

    def constitutive(self, C: np.ndarray):
        """Stress and tangent at every Gauss point, dispatching on element tags."""
        ne, ngp = C.shape[:2]
        S = np.empty((ne, ngp, 3))
        D = np.empty((ne, ngp, 3, 3))
        for tag, idx in self._tag_groups.items():
            if idx.size == 0:
                continue
            Ct = C[idx].reshape(-1, 3)
            try:
                s, d = self.laws[tag].response(Ct)
            except MaterialError as exc:
                I3 = Ct[:, 0] * Ct[:, 1] - Ct[:, 2] ** 2
                bad = idx[int(np.argmin(I3)) // ngp]
                raise ElementError(int(bad), exc) from exc
            S[idx] = np.asarray(s).reshape(len(idx), ngp, 3)
            D[idx] = np.asarray(d).reshape(len(idx), ngp, 3, 3)
        return S, D

    def element_arrays(self, u: np.ndarray, want_stiffness: bool = True):
        F, C = self.kinematics(u)
        S, D = self.constitutive(C)
        r, K = residual_and_stiffness(self.geometry, F, S, D, want_stiffness)
        return r, K

    def internal_force(self, u: np.ndarray) -> np.ndarray:
        r, _ = self.element_arrays(u, want_stiffness=False)
        return np.bincount(self.edofs.ravel(), weights=r.ravel(), minlength=self.mesh.n_dofs)

    def assemble(self, u: np.ndarray, load: float):
        """Full residual ``f_int - load f_ext`` and the condensed tangent blocks.

        Returns:
            ``(R, K_ff, K_fp)``; ``R`` has length ``n_dofs`` (reactions on fixed dofs).
        """
        r, K = self.element_arrays(u)
        R = np.bincount(self.edofs.ravel(), weights=r.ravel(), minlength=self.mesh.n_dofs) - load * self.f_ext
        Kv = K.ravel()
        return R, self._pat_ff.matrix(Kv), self._pat_fp.matrix(Kv)

    def global_tangent(self, u: np.ndarray) -> sp.csr_matrix:
        """Unconstrained global tangent (testing and diagnostics)."""
        _, K = self.element_arrays(u)
        rows = np.repeat(self.edofs, self.edofs.shape[1], axis=1).ravel()
        cols = np.tile(self.edofs, (1, self.edofs.shape[1])).ravel()
        return sp.coo_matrix((K.ravel(), (rows, cols)), shape=(self.mesh.n_dofs,) * 2).tocsr()

    def gauss_fields(self, u: np.ndarray) -> dict[str, np.ndarray]:
        """Flattened Gauss-point table: coordinates, F, C, E, S, D."""
        F, C = self.kinematics(u)
        S, D = self.constitutive(C)
        n = C.shape[0] * C.shape[1]
        return {
            "element": np.repeat(np.arange(C.shape[0]), C.shape[1]),
            "x": self.geometry.xg.reshape(n, 2),
            "F": F.reshape(n, 2, 2),
            "C": C.reshape(n, 3),
            "E": 0.5 * (C.reshape(n, 3) - np.array([1.0, 1.0, 0.0])),
            "S": S.reshape(n, 3),
            "D": D.reshape(n, 3, 3),
            "weight": self.geometry.weight.reshape(n),
        }
