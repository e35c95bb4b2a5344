"""Mesh, solution and Gauss-point field export."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from ..mechanics import pack_tangent
from .mesh import Mesh

GAUSS_COLUMNS = ("element", "x", "y", "E11", "E22", "E12", "S11", "S22", "S12",
                 "D11", "D12", "D13", "D22", "D23", "D33")


def write_solution_json(mesh: Mesh, u: np.ndarray, path: str | os.PathLike, **extra) -> None:
    """Nodes, connectivity, tags and nodal displacements as one JSON document."""
    doc = {"nodes": mesh.nodes.tolist(), "elements": mesh.elements.tolist(), "tags": mesh.tags.tolist(),
           "displacement": np.asarray(u).reshape(-1, 2).tolist(), **extra}
    with open(path, "w") as fh:
        json.dump(doc, fh)


def gauss_rows(fields: dict) -> list[dict]:
    """Rows of the Gauss-point table built from ``FeProblem.gauss_fields``."""
    d = pack_tangent(fields["D"])
    rows = []
    for i in range(len(fields["element"])):
        vals = [int(fields["element"][i]), *fields["x"][i], *fields["E"][i], *fields["S"][i], *d[i]]
        rows.append(dict(zip(GAUSS_COLUMNS, vals)))
    return rows


def write_gauss_csv(fields: dict, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=GAUSS_COLUMNS)
        w.writeheader()
        w.writerows(gauss_rows(fields))


def write_gauss_jsonl(fields: dict, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        for row in gauss_rows(fields):
            fh.write(json.dumps(row) + "\n")
