"""Vectorized total-Lagrangian kernels for Q4 and T3 elements."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import MeshError

_G = 1.0 / np.sqrt(3.0)
QUAD_POINTS = {
    4: (np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]]), np.ones(4)),
    3: (np.array([[1.0 / 3.0, 1.0 / 3.0]]), np.array([0.5])),
}


def shape_functions(n_nodes: int, xi: np.ndarray):
    """Values ``(ngp, nn)`` and parent derivatives ``(ngp, nn, 2)``."""
    r, s = xi[:, 0], xi[:, 1]
    if n_nodes == 4:
        N = 0.25 * np.stack([(1 - r) * (1 - s), (1 + r) * (1 - s), (1 + r) * (1 + s), (1 - r) * (1 + s)], axis=1)
        dN = 0.25 * np.stack([
            np.stack([-(1 - s), -(1 - r)], axis=1),
            np.stack([(1 - s), -(1 + r)], axis=1),
            np.stack([(1 + s), (1 + r)], axis=1),
            np.stack([-(1 + s), (1 - r)], axis=1),
        ], axis=1)
    elif n_nodes == 3:
        N = np.stack([1 - r - s, r, s], axis=1)
        dN = np.broadcast_to(np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]), (len(xi), 3, 2)).copy()
    else:
        raise MeshError(f"unsupported element with {n_nodes} nodes")
    return N, dN


@dataclass
class ElementGeometry:
    """Reference-configuration quadrature data for a homogeneous element set.

    Attributes:
        dNdX: ``(ne, ngp, nn, 2)`` material shape-function gradients.
        weight: ``(ne, ngp)`` quadrature weight times Jacobian determinant.
        xg: ``(ne, ngp, 2)`` reference Gauss-point coordinates.
    """

    dNdX: np.ndarray
    weight: np.ndarray
    xg: np.ndarray

    @classmethod
    def build(cls, nodes: np.ndarray, elements: np.ndarray) -> "ElementGeometry":
        nn = elements.shape[1]
        xi, w = QUAD_POINTS[nn]
        N, dN = shape_functions(nn, xi)
        xe = nodes[elements]  # (ne, nn, 2)
        J = np.einsum("eai,gaj->egij", xe, dN)
        detJ = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.any(detJ <= 0.0):
            bad = int(np.argwhere(detJ <= 0.0)[0, 0])
            raise MeshError(f"non-positive reference Jacobian in element {bad}")
        Jinv = np.linalg.inv(J)
        dNdX = np.einsum("gaj,egji->egai", dN, Jinv)
        xg = np.einsum("ga,eai->egi", N, xe)
        return cls(dNdX=dNdX, weight=detJ * w, xg=xg)

    @property
    def n_points(self) -> int:
        return self.weight.size


def deformation_gradient(geom: ElementGeometry, ue: np.ndarray) -> np.ndarray:
    """``F = I + Grad u`` at every Gauss point, shape ``(ne, ngp, 2, 2)``."""
    return np.eye(2) + np.swapaxes(ue, 1, 2)[:, None] @ geom.dNdX


def strain_displacement(F: np.ndarray, dNdX: np.ndarray) -> np.ndarray:
    """Nonlinear B operator mapping nodal dofs to ``dE_voigt``; ``(ne, ngp, 3, 2nn)``."""
    ne, ngp, nn, _ = dNdX.shape
    B = np.empty((ne, ngp, 3, nn, 2))
    # B[..., row, a, i]; dof ordering (a, i) -> 2a + i
    B[:, :, 0] = F[:, :, None, :, 0] * dNdX[:, :, :, None, 0]
    B[:, :, 1] = F[:, :, None, :, 1] * dNdX[:, :, :, None, 1]
    B[:, :, 2] = F[:, :, None, :, 0] * dNdX[:, :, :, None, 1] + F[:, :, None, :, 1] * dNdX[:, :, :, None, 0]
    return B.reshape(ne, ngp, 3, 2 * nn)


def residual_and_stiffness(geom: ElementGeometry, F: np.ndarray, S: np.ndarray, D: np.ndarray,
                           want_stiffness: bool = True):
    """Element internal forces ``(ne, 2nn)`` and tangents ``(ne, 2nn, 2nn)``.

    ``S`` and ``D`` are the Gauss-point Voigt stress and tangent, shapes
    ``(ne, ngp, 3)`` and ``(ne, ngp, 3, 3)``.
    """
    B = strain_displacement(F, geom.dNdX)
    w = geom.weight
    r = np.einsum("egra,egr->ea", B, S * w[..., None])
    if not want_stiffness:
        return r, None
    Bt = np.swapaxes(B, -1, -2)
    K = ((Bt * w[..., None, None]) @ (D @ B)).sum(axis=1)
    S2 = np.empty(S.shape[:-1] + (2, 2))
    S2[..., 0, 0], S2[..., 1, 1] = S[..., 0], S[..., 1]
    S2[..., 0, 1] = S2[..., 1, 0] = S[..., 2]
    G = ((geom.dNdX * w[..., None, None]) @ S2 @ np.swapaxes(geom.dNdX, -1, -2)).sum(axis=1)
    ne, nn = G.shape[0], G.shape[1]
    K4 = K.reshape(ne, nn, 2, nn, 2)
    K4[:, :, 0, :, 0] += G
    K4[:, :, 1, :, 1] += G
    return r, K
