"""Compression block and Cook's membrane driven by any constitutive law."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..fem.mesh import Mesh, compression_mesh, cook_mesh
from ..fem.problem import BoundaryConditions, FeProblem, Traction
from ..fem.solver import SolveReport, ipi, run_load_program
from .common import COMPRESSION, COOK


def compression_problem(law, L: float = COMPRESSION["L"], H: float = COMPRESSION["H"],
                        n_el: int = COMPRESSION["n_el"], q_bar: float = COMPRESSION["q_bar"]):
    """Block on a fixed base, pressed by ``q_bar`` on the central half of its top.

    The loaded top nodes are held horizontally. The load factor is ``q / q_bar``.

    Returns:
        ``(problem, points)`` where ``points`` maps ``"P1"`` (top centre) and
        ``"P2"`` (mid-height of the right edge) to node ids.
    """
    mesh = compression_mesh(L, H, n_el)
    top = mesh.edges["top"]
    lo, hi = 0.25 * L, 0.75 * L
    xs = mesh.nodes[:, 0]
    top_nodes = mesh.node_sets["top"]
    loaded = top_nodes[(xs[top_nodes] >= lo - 1e-9 * L) & (xs[top_nodes] <= hi + 1e-9 * L)]
    bc = BoundaryConditions.from_nodes(mesh.node_sets["bottom"])
    bc = bc.merged(BoundaryConditions.from_nodes(loaded, components=(0,)))
    bc.tractions.append(Traction(top, np.array([0.0, -q_bar]), interval=(lo, hi), axis=0))
    points = {"P1": _nearest(mesh, (0.5 * L, H)), "P2": _nearest(mesh, (L, 0.5 * H))}
    return FeProblem(mesh, law, bc), points


def cook_problem(law, L: float = COOK["L"], H: float = COOK["H"], h: float = COOK["h"],
                 n_el: int = COOK["n_el"], q_bar: float = COOK["q_bar"]):
    """Tapered membrane clamped on the left, sheared upwards on the right edge."""
    mesh = cook_mesh(L, H, h, n_el)
    bc = BoundaryConditions.from_nodes(mesh.node_sets["left"])
    bc.tractions.append(Traction(mesh.edges["right"], np.array([0.0, q_bar])))
    points = {"P1": int(mesh.node_sets["P1"][0])}
    return FeProblem(mesh, law, bc), points


def _nearest(mesh: Mesh, x) -> int:
    return int(np.argmin(np.linalg.norm(mesh.nodes - np.asarray(x), axis=1)))


@dataclass
class BenchmarkResult:
    name: str
    report: SolveReport
    traces: list[dict] = field(default_factory=list)
    fields: dict | None = None

    @property
    def last_load(self) -> float:
        return self.report.last_converged_load


def cauchy_green_stats(C: np.ndarray) -> dict:
    """Mean, std, min and max of each Voigt component over Gauss points."""
    out = {}
    for j, name in enumerate(("C11", "C22", "C12")):
        v = C[:, j]
        out.update({f"{name}_mean": float(v.mean()), f"{name}_std": float(v.std()),
                    f"{name}_min": float(v.min()), f"{name}_max": float(v.max())})
    return out


def run_benchmark(name: str, law, *, target: float = 1.5, steps: int = 20, mode: str = "adaptive",
                  n_el: int | None = None, keep_fields: bool = True) -> BenchmarkResult:
    """Run ``compression`` or ``cook`` up to ``target`` times the reference load.

    Divergence is a result, not an error: the traces stop at the last
    converged load, which the report records.
    """
    if name == "compression":
        size = COMPRESSION
        problem, points = compression_problem(law, n_el=n_el or size["n_el"])
    elif name == "cook":
        size = COOK
        problem, points = cook_problem(law, n_el=n_el or size["n_el"])
    else:
        raise ValueError(f"unknown benchmark {name!r}")
    traces: list[dict] = []
    last = {}

    def record(load, u):
        disp = u.reshape(-1, 2)
        row = {"q_over_qbar": float(load)}
        if name == "compression":
            row["v1_over_H"] = float(disp[points["P1"], 1] / size["H"])
            row["u2_over_L"] = float(disp[points["P2"], 0] / size["L"])
        else:
            row["v1_over_H"] = float(disp[points["P1"], 1] / size["H"])
            row["u1_over_L"] = float(disp[points["P1"], 0] / size["L"])
        _, C = problem.kinematics(u)
        row.update(cauchy_green_stats(C.reshape(-1, 3)))
        traces.append(row)
        last["u"] = u

    _, report = run_load_program(problem, target, steps, mode, on_step=record)
    for row, step in zip(traces, report.converged_steps):
        row["iterations"] = step.iterations
    fields = problem.gauss_fields(last["u"]) if keep_fields and "u" in last else None
    return BenchmarkResult(name, report, traces, fields)


def truncated(report: SolveReport, load: float) -> SolveReport:
    """Converged steps of ``report`` up to ``load``."""
    eps = 1e-9 * max(1.0, abs(load))
    steps = [s for s in report.converged_steps if s.load <= load + eps]
    return SolveReport(steps=steps, target=report.target, completed=False)


def ipi_at(report: SolveReport, reference: SolveReport, load: float) -> float:
    """IPI over the steps up to the largest load both runs converged at, not above ``load``."""
    eps = 1e-9 * max(1.0, abs(load))
    mine = {round(s.load, 12) for s in report.converged_steps if s.load <= load + eps}
    theirs = {round(s.load, 12) for s in reference.converged_steps if s.load <= load + eps}
    common = sorted(mine & theirs)
    if not common:
        raise ValueError("no common converged load level")
    return ipi(truncated(report, common[-1]), truncated(reference, common[-1]))


def relative_variation(trace: list[dict], reference: list[dict], key: str = "v1_over_H") -> list[dict]:
    """``|v - v_ref| / |v_ref|`` at the load levels present in both traces."""
    ref = {round(r["q_over_qbar"], 12): r[key] for r in reference}
    out = []
    for r in trace:
        q = round(r["q_over_qbar"], 12)
        if q in ref and ref[q] != 0.0:
            out.append({"q_over_qbar": r["q_over_qbar"], "variation": abs(r[key] - ref[q]) / abs(ref[q])})
    return out
