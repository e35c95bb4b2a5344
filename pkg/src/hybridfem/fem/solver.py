"""Newton-Raphson solver, load programs and the iterative performance index."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ComparisonError, ElementError, HybridFemError, SolverDivergence
from .problem import FeProblem

logger = logging.getLogger(__name__)

TOL_REL = 1e-8
TOL_ABS = 1e-10
MAX_ITER = 30
LINE_SEARCH_ITERS = 6
LINE_SEARCH_RATIO = 0.5


def factorize(K: sp.spmatrix):
    """Sparse LU of a (nearly) symmetric tangent; raises SolverDivergence if singular."""
    if K.shape[0] == 0:
        return None
    try:
        lu = spla.splu(sp.csc_matrix(K), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise SolverDivergence(f"singular tangent: {exc}") from exc
    return lu


@dataclass
class NewtonResult:
    u: np.ndarray
    iterations: int
    converged: bool
    residuals: list[float]
    message: str = ""
    lu: object = None
    K_fp: sp.spmatrix | None = None


def newton_solve(problem: FeProblem, load: float, u_init: np.ndarray, *, tol_rel: float = TOL_REL,
                 tol_abs: float = TOL_ABS, max_iter: int = MAX_ITER, keep_factor: bool = False,
                 backtrack: int = 0, line_search: bool = False) -> NewtonResult:
    """Solve ``R(u) = f_int(u) - load f_ext = 0`` on the free dofs.

    Convergence: ``|R_free| <= tol_abs + tol_rel * f_ref`` where ``f_ref`` is the
    larger of the external-load norm and the reaction norm on prescribed dofs.
    The iteration count is the number of linear solves performed.

    With ``keep_factor`` the factorized free-free tangent at the converged state
    is returned together with the free-prescribed block, for sensitivity
    analysis.

    ``backtrack > 0`` allows up to that many halvings of a Newton correction
    that would invert an element; plain Newton otherwise. ``line_search``
    additionally scales each correction so that the residual projected on it
    drops by a fixed factor (secant search, a few residual evaluations).
    """
    u = problem.impose(u_init, load)
    free = problem.free
    residuals: list[float] = []
    it = 0
    while True:
        try:
            R, K_ff, K_fp = problem.assemble(u, load)
        except (ElementError, HybridFemError) as exc:
            return NewtonResult(u, it, False, residuals, f"constitutive failure: {exc}")
        Rf = R[free]
        norm = float(np.linalg.norm(Rf))
        residuals.append(norm)
        if not np.isfinite(norm):
            return NewtonResult(u, it, False, residuals, "non-finite residual")
        f_ref = max(float(np.linalg.norm(load * problem.f_ext)), float(np.linalg.norm(R[problem.fixed])))
        if norm <= tol_abs + tol_rel * f_ref:
            lu = factorize(K_ff) if keep_factor else None
            return NewtonResult(u, it, True, residuals, "converged", lu, K_fp if keep_factor else None)
        if it >= max_iter:
            return NewtonResult(u, it, False, residuals, "max_iter exceeded")
        try:
            lu = factorize(K_ff)
        except SolverDivergence as exc:
            return NewtonResult(u, it, False, residuals, str(exc))
        du = lu.solve(-Rf) if lu is not None else np.zeros(0)
        if not np.all(np.isfinite(du)):
            return NewtonResult(u, it, False, residuals, "non-finite increment")
        u = _update(problem, load, u, du, Rf, backtrack, line_search)
        it += 1


def _update(problem: FeProblem, load: float, u: np.ndarray, du: np.ndarray, Rf: np.ndarray,
            backtrack: int, line_search: bool) -> np.ndarray:
    """Apply a Newton correction, optionally damped (see ``newton_solve``)."""
    free = problem.free

    def moved(alpha):
        out = u.copy()
        out[free] += alpha * du
        return out

    alpha = 1.0
    for _ in range(backtrack):
        try:
            problem.kinematics(moved(alpha))
            break
        except ElementError:
            alpha *= 0.5
    s0 = float(du @ Rf)
    if not line_search or s0 >= 0.0:
        return moved(alpha)
    lo, s_lo = 0.0, s0
    for _ in range(LINE_SEARCH_ITERS):
        try:
            r = problem.internal_force(moved(alpha))[free] - load * problem.f_ext[free]
        except ElementError:
            alpha = 0.5 * (lo + alpha)
            continue
        s_a = float(du @ r)
        if abs(s_a) <= LINE_SEARCH_RATIO * abs(s0) or (s_a < 0.0 and alpha >= 1.0):
            break
        if s_a < 0.0:
            lo, s_lo = alpha, s_a
            alpha = min(1.0, 2.0 * alpha)
            continue
        # secant between the last negative projection and this positive one
        guess = alpha - s_a * (alpha - lo) / (s_a - s_lo)
        alpha = float(np.clip(guess, lo + 0.1 * (alpha - lo), lo + 0.9 * (alpha - lo)))
    return moved(alpha)


@dataclass
class StepRecord:
    load: float
    iterations: int
    residual: float
    converged: bool


@dataclass
class SolveReport:
    """Per-attempt log of a load program."""

    steps: list[StepRecord] = field(default_factory=list)
    target: float = 1.0
    completed: bool = False

    @property
    def converged_steps(self) -> list[StepRecord]:
        return [s for s in self.steps if s.converged]

    @property
    def last_converged_load(self) -> float:
        conv = self.converged_steps
        return conv[-1].load if conv else 0.0

    @property
    def total_iterations(self) -> int:
        return sum(s.iterations for s in self.steps)

    @property
    def mean_iterations(self) -> float:
        """Average Newton iterations per converged load step."""
        conv = self.converged_steps
        return float(np.mean([s.iterations for s in conv])) if conv else float("nan")

    def to_dict(self) -> dict:
        return {"target": self.target, "completed": self.completed,
                "last_converged_load": self.last_converged_load,
                "mean_iterations": self.mean_iterations,
                "steps": [s.__dict__ for s in self.steps]}


@dataclass
class LoadHistory:
    loads: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)


def dirichlet_predictor(problem: FeProblem, u: np.ndarray, load_from: float, load_to: float) -> np.ndarray:
    """Start vector for ``load_to``: linearized response of the free dofs to the prescribed increment.

    Solves ``K_ff du_f = -K_fp du_p`` at the converged state ``u``. Returns
    ``u`` unchanged when the prescribed values do not move, and falls back to
    it when the predicted state is inadmissible.
    """
    dp = problem.prescribed(load_to) - problem.prescribed(load_from)
    if not np.any(dp):
        return u
    try:
        _, K_ff, K_fp = problem.assemble(u, load_from)
        lu = factorize(K_ff)
        out = problem.impose(u, load_to)
        if lu is not None:
            out[problem.free] += lu.solve(-(K_fp @ dp))
        problem.kinematics(out)
    except (ElementError, HybridFemError):
        return u
    return out if np.all(np.isfinite(out)) else u


def run_load_program(problem: FeProblem, target: float, steps: int, mode: str = "fixed", *,
                     u0: np.ndarray | None = None,
                     on_step: Callable[[float, np.ndarray], None] | None = None,
                     predictor: bool = True, **newton_kw) -> tuple[LoadHistory, SolveReport]:
    """Drive the load factor from 0 to ``target``.

    ``fixed``: ``steps`` equal increments, stop at the first divergence.
    ``adaptive``: the nominal increment is ``target / steps``; on divergence it
    is halved, never going below a tenth of the nominal value; after a
    converged step it is doubled back towards the nominal value. When the
    floor is hit the program stops and the history ends at the last
    converged load.

    With ``predictor`` each step starts from ``dirichlet_predictor``; this
    only matters when prescribed displacements are nonzero and is not
    counted as an iteration.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if mode not in ("fixed", "adaptive"):
        raise ValueError(f"unknown load program mode {mode!r}")
    u = np.zeros(problem.mesh.n_dofs) if u0 is None else np.asarray(u0, dtype=float).copy()
    history = LoadHistory()
    report = SolveReport(target=target)
    nominal = target / steps
    floor = nominal / 10.0
    inc = nominal
    lam = 0.0
    eps = 1e-12 * abs(target)
    while lam < target - eps:
        trial = min(lam + inc, target)
        start = dirichlet_predictor(problem, u, lam, trial) if predictor else u
        res = newton_solve(problem, trial, start, **newton_kw)
        report.steps.append(StepRecord(trial, res.iterations, res.residuals[-1] if res.residuals else float("nan"),
                                       res.converged))
        if res.converged:
            lam, u = trial, res.u
            history.loads.append(lam)
            history.states.append(u)
            if on_step is not None:
                on_step(lam, u)
            if mode == "adaptive":
                inc = min(2.0 * inc, nominal)
            continue
        logger.debug("divergence at load %.6g: %s", trial, res.message)
        if mode == "fixed":
            break
        inc *= 0.5
        if inc < floor * (1.0 - 1e-12):
            break
    report.completed = lam >= target - eps
    return history, report


def ipi(report: SolveReport, reference: SolveReport, rtol: float = 1e-9) -> float:
    """Iterative performance index: mean iterations per step over the reference's."""
    a, b = report.last_converged_load, reference.last_converged_load
    if abs(a - b) > rtol * max(abs(a), abs(b), 1.0):
        raise ComparisonError(f"reports reach different load levels ({a} vs {b})")
    return report.mean_iterations / reference.mean_iterations
