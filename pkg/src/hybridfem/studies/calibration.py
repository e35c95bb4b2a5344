"""Least-deviation calibration of the macro parameter against RVE stresses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import f_from_triplet
from ..errors import FitError, HomogenizationError
from ..mechanics import macro_model, right_cauchy_green, voigt_to_tensor

C1_BOUNDS = (0.0, 100.0)
_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def calibration_samples(n: int = 10) -> np.ndarray:
    """Triplets of the three sweeps: ``F11`` and ``F22`` in [0.75, 1.25], ``F12`` in [-0.25, 0.25]."""
    v = np.linspace(0.75, 1.25, n)
    s = np.linspace(-0.25, 0.25, n)
    one, zero = np.ones(n), np.zeros(n)
    return np.vstack([np.c_[v, one, zero], np.c_[one, v, zero], np.c_[one, one, s]])


def objective(c1: float, C: np.ndarray, S_ref: np.ndarray) -> float:
    """Sum over samples of the Frobenius norm of the stress deviation."""
    _, S, _ = macro_model(C, float(c1))
    return float(np.linalg.norm(voigt_to_tensor(S - S_ref), axis=(-2, -1)).sum())


def golden_section(f, a: float, b: float, tol: float = 1e-9, max_iter: int = 200):
    """Minimizer of a unimodal ``f`` on ``[a, b]`` and the final bracket width."""
    c, d = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b), b - a


@dataclass
class Calibration:
    c1: float
    fobj: float
    samples: np.ndarray
    S_ref: np.ndarray

    def scan(self, grid) -> np.ndarray:
        C = right_cauchy_green(np.stack([f_from_triplet(t) for t in self.samples]))
        return np.array([objective(g, C, self.S_ref) for g in grid])


def calibrate_c1(source, n: int = 10, bounds: tuple[float, float] = C1_BOUNDS) -> Calibration:
    """Fit ``C1`` to the stresses returned by ``source`` along the three sweeps.

    Args:
        source: callable mapping triplets ``(m, 3)`` to ``(S, D)``.
        n: samples per sweep.
        bounds: search interval.
    """
    f = calibration_samples(n)
    try:
        S_ref, _ = source(f)
    except HomogenizationError as exc:
        raise FitError(f"calibration sweep diverged: {exc}") from exc
    C = right_cauchy_green(np.stack([f_from_triplet(t) for t in f]))
    c1, _ = golden_section(lambda c: objective(c, C, S_ref), *bounds)
    return Calibration(c1, objective(c1, C, S_ref), f, np.asarray(S_ref))
