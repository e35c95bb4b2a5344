"""Particle swarm optimization with a compass-search polish.

The objective is evaluated on batches of points, ``f(X) -> values`` with
``X`` of shape ``(m, d)``, so an expensive objective can share work across
the swarm. Infinite values mark infeasible points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class PsoConfig:
    particles: int = 40
    iterations: int = 200
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5
    pattern_steps: int = 100
    pattern_step0: float = 0.1  # initial compass step, as a fraction of the box width
    pattern_tol: float = 1e-6
    stall_iterations: int | None = None  # optional early stop when the best value stalls


@dataclass
class PsoResult:
    x: np.ndarray
    fun: float
    evaluations: int
    iterations: int


def minimize(f: Callable[[np.ndarray], np.ndarray], lower: np.ndarray, upper: np.ndarray,
             config: PsoConfig = PsoConfig(), seed: int | np.random.Generator | None = 0) -> PsoResult:
    """Minimize ``f`` over the box ``[lower, upper]``.

    Velocities are clamped to the box width and positions are clipped to
    the box. The best particle is then refined by compass search: each poll
    tries ``+-step`` along every axis, moves to the best improvement, and
    halves the step when nothing improves.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    span = upper - lower
    rng = np.random.default_rng(seed)
    n, d = config.particles, len(lower)
    x = lower + rng.random((n, d)) * span
    v = (rng.random((n, d)) - 0.5) * span * 0.1
    fx = np.asarray(f(x), dtype=float)
    evals = n
    pbest, fbest = x.copy(), fx.copy()
    g = int(np.argmin(fbest))
    gbest, gval = pbest[g].copy(), fbest[g]
    stall = 0
    it = 0
    for it in range(1, config.iterations + 1):
        r1, r2 = rng.random((n, d)), rng.random((n, d))
        v = config.inertia * v + config.cognitive * r1 * (pbest - x) + config.social * r2 * (gbest - x)
        v = np.clip(v, -span, span)
        x = np.clip(x + v, lower, upper)
        fx = np.asarray(f(x), dtype=float)
        evals += n
        better = fx < fbest
        pbest[better], fbest[better] = x[better], fx[better]
        g = int(np.argmin(fbest))
        margin = 1e-12 * max(1.0, abs(gval)) if np.isfinite(gval) else 0.0
        if fbest[g] < gval - margin:
            stall = 0
        else:
            stall += 1
        if fbest[g] < gval:
            gbest, gval = pbest[g].copy(), fbest[g]
        if config.stall_iterations is not None and stall >= config.stall_iterations:
            break

    step = config.pattern_step0 * span
    for _ in range(config.pattern_steps):
        if np.all(step < config.pattern_tol * span):
            break
        polls = np.vstack([gbest + s * np.eye(d)[k] * step for k in range(d) for s in (1.0, -1.0)])
        polls = np.clip(polls, lower, upper)
        fp = np.asarray(f(polls), dtype=float)
        evals += len(polls)
        k = int(np.argmin(fp))
        if fp[k] < gval:
            gbest, gval = polls[k], fp[k]
        else:
            step = 0.5 * step
    return PsoResult(x=gbest, fun=float(gval), evaluations=evals, iterations=it)
