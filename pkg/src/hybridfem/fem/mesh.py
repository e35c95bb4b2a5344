"""Meshes for the macroscale benchmarks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import MeshError
from .element import ElementGeometry


@dataclass
class Mesh:
    """Nodes, connectivity and per-element material tags.

    ``edges`` maps a boundary name to ``(n, 2)`` node pairs ordered along the
    boundary; ``node_sets`` maps names to node indices.
    """

    nodes: np.ndarray
    elements: np.ndarray
    tags: np.ndarray | None = None
    edges: dict[str, np.ndarray] = field(default_factory=dict)
    node_sets: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.elements = np.asarray(self.elements, dtype=np.int64)
        if self.tags is None:
            self.tags = np.zeros(len(self.elements), dtype=np.int64)
        self.tags = np.asarray(self.tags, dtype=np.int64)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 2:
            raise MeshError("nodes must have shape (n, 2)")
        if self.elements.ndim != 2 or self.elements.shape[1] not in (3, 4):
            raise MeshError("elements must be (m, 3) triangles or (m, 4) quads")
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= len(self.nodes)):
            raise MeshError("connectivity index out of node range")
        if len(self.tags) != len(self.elements):
            raise MeshError("one material tag per element required")
        self._geometry = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_dofs(self) -> int:
        return 2 * len(self.nodes)

    @property
    def geometry(self) -> ElementGeometry:
        if self._geometry is None:
            self._geometry = ElementGeometry.build(self.nodes, self.elements)
        return self._geometry

    def validate(self) -> "Mesh":
        self.geometry  # raises MeshError on degenerate elements
        return self

    def area(self) -> float:
        return float(self.geometry.weight.sum())

    def boundary_nodes(self) -> np.ndarray:
        """Nodes on edges used by exactly one element."""
        pairs = np.stack([self.elements, np.roll(self.elements, -1, axis=1)], axis=-1).reshape(-1, 2)
        uniq, counts = np.unique(np.sort(pairs, axis=1), axis=0, return_counts=True)
        return np.unique(uniq[counts == 1])

    def permuted(self, order: np.ndarray) -> "Mesh":
        """Same mesh with elements reordered."""
        return Mesh(self.nodes.copy(), self.elements[order], self.tags[order],
                    {k: v.copy() for k, v in self.edges.items()},
                    {k: v.copy() for k, v in self.node_sets.items()})


def mapped_quad_grid(nx: int, ny: int, mapping: Callable[[np.ndarray, np.ndarray], tuple]) -> Mesh:
    """Structured ``nx x ny`` Q4 grid of the unit square pushed through ``mapping``.

    Edges ``bottom``, ``right``, ``top``, ``left`` are recorded in parametric order
    (increasing xi along bottom/top, increasing eta along left/right).
    """
    if nx < 1 or ny < 1:
        raise MeshError("element counts must be >= 1")
    xi, eta = np.meshgrid(np.linspace(0.0, 1.0, nx + 1), np.linspace(0.0, 1.0, ny + 1))
    x, y = mapping(xi.ravel(), eta.ravel())
    nodes = np.column_stack([x, y])
    nid = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    elements = np.stack([nid[:-1, :-1], nid[:-1, 1:], nid[1:, 1:], nid[1:, :-1]], axis=-1).reshape(-1, 4)

    def chain(ids):
        return np.column_stack([ids[:-1], ids[1:]])

    edges = {"bottom": chain(nid[0, :]), "top": chain(nid[-1, :]),
             "left": chain(nid[:, 0]), "right": chain(nid[:, -1])}
    sets = {k: np.unique(v) for k, v in edges.items()}
    return Mesh(nodes, elements, edges=edges, node_sets=sets).validate()


def rectangle_mesh(L: float, H: float, n_el: int) -> Mesh:
    """Rectangle with ``n_el`` divisions along L and ``round(n_el H / L)`` along H."""
    if not (L > 0 and H > 0):
        raise MeshError("rectangle sides must be positive")
    if n_el < 1:
        raise MeshError("n_el must be >= 1")
    ny = max(1, int(round(n_el * H / L)))
    return mapped_quad_grid(n_el, ny, lambda a, b: (a * L, b * H))


def compression_mesh(L: float = 100.0, H: float = 50.0, n_el: int = 30) -> Mesh:
    mesh = rectangle_mesh(L, H, n_el)
    mesh.node_sets["fixed"] = mesh.node_sets["bottom"]
    return mesh


def cook_mesh(L: float = 480.0, H: float = 440.0, h: float = 16.0, n_el: int = 30) -> Mesh:
    """Cook trapezoid with vertices (0,0), (L,H), (L,H+10h), (0,H); ``n_el x n_el`` quads."""
    if not (L > 0 and H > 0 and h > 0):
        raise MeshError("Cook dimensions must be positive")
    right = 10.0 * h

    def mapping(a, b):
        y0 = a * H
        y1 = H + a * right
        return a * L, y0 + b * (y1 - y0)

    mesh = mapped_quad_grid(n_el, n_el, mapping)
    top_right = int(mesh.edges["right"][-1, 1])
    mesh.node_sets["P1"] = np.array([top_right])
    return mesh


# interior nodes of the distorted 5-element patch, in units of L
_PATCH_INTERIOR = np.array([[0.18, 0.22], [0.72, 0.16], [0.84, 0.74], [0.28, 0.68]])


def patch_mesh(L: float = 100.0) -> Mesh:
    """Square of side L meshed with 5 non-rectangular quads on 8 nodes."""
    if not L > 0:
        raise MeshError("patch side must be positive")
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    nodes = L * np.vstack([corners, _PATCH_INTERIOR])
    elements = np.array([[4, 5, 6, 7], [0, 1, 5, 4], [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]])
    edges = {"bottom": np.array([[0, 1]]), "right": np.array([[1, 2]]),
             "top": np.array([[2, 3]]), "left": np.array([[3, 0]])}
    sets = {"boundary": np.arange(4), "interior": np.arange(4, 8)}
    return Mesh(nodes, elements, edges=edges, node_sets=sets).validate()


def edge_interpolate(mesh: Mesh, values: np.ndarray, edge: str, point: np.ndarray) -> np.ndarray:
    """Linearly interpolate nodal ``values`` at a reference ``point`` lying on ``edge``."""
    point = np.asarray(point, dtype=float)
    best = None
    for a, b in mesh.edges[edge]:
        xa, xb = mesh.nodes[a], mesh.nodes[b]
        d = xb - xa
        t = float(np.dot(point - xa, d) / np.dot(d, d))
        dist = np.linalg.norm(xa + np.clip(t, 0.0, 1.0) * d - point)
        if best is None or dist < best[0]:
            best = (dist, a, b, float(np.clip(t, 0.0, 1.0)))
    _, a, b, t = best
    return (1.0 - t) * values[a] + t * values[b]
