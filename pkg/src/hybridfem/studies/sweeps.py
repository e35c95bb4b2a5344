"""Error sweeps over training-set density and over the macro parameter."""

from __future__ import annotations

import numpy as np

from ..dataset import TrainingRegion
from ..hybrid import HybridLaw, Mode
from .common import CLOUD_SIZE, CLOUD_SEED, N_LAYERS_SWEEP, Workspace
from .metrics import compute_errors


def density_sweep(ws: Workspace, width: float = 0.25, n_layers=N_LAYERS_SWEEP, c1: float = 3.704,
                  modes=(Mode.HYBRID, Mode.DATA), n_ref: int = CLOUD_SIZE, seed: int = CLOUD_SEED,
                  lambdas=None) -> list[dict]:
    """Errors of each mode for every layer count, on one reference cloud.

    Rows carry the errors at every control half-width in ``lambdas``
    (default: only ``width``), under both the plain and the RMS metric.
    """
    f, S, D = ws.reference_cloud(width, n_ref, seed)
    lambdas = [width] if lambdas is None else list(lambdas)
    rows = []
    for n in n_layers:
        for mode in modes:
            law = ws.law(mode, width, n, c1)
            plain = compute_errors(law, f, S, D, lambdas)
            rms = compute_errors(law, f, S, D, lambdas, rms=True)
            for lam in lambdas:
                a, b = plain.at(lam), rms.at(lam)
                rows.append({"n_layers": n, "n_tp": TrainingRegion(width, n).n_points, "mode": Mode(mode).value,
                             "lambda_c": a["lambda"], "n_ref": a["n_ref"], "E_S": a["E_S"], "E_D": a["E_D"],
                             "E_tot": a["E_tot"], "E_S_rms": b["E_S"], "E_D_rms": b["E_D"],
                             "E_tot_rms": b["E_tot"]})
    return rows


def c1_sweep(ws: Workspace, c1_fit: float, factors=(0.0, 0.5, 1.0, 2.0, 5.0, 10.0), width: float = 0.25,
             n_layers: int = 10, n_ref: int = CLOUD_SIZE, seed: int = CLOUD_SEED) -> list[dict]:
    """Model-driven and hybrid errors for macro parameters ``factor * c1_fit``.

    The hybrid remainder is retrained for every macro parameter on the same
    samples; ``C1 = 0`` makes it purely data driven.
    """
    f, S, D = ws.reference_cloud(width, n_ref, seed)
    base = ws.grid_set(width, n_layers, 0.0)
    rows = []
    for k in factors:
        c1 = float(k) * c1_fit
        hybrid = HybridLaw(Mode.HYBRID, c1, ws.model(base.rebased(c1)))
        row = {"factor": float(k), "C1": c1}
        for name, law in (("model", HybridLaw(Mode.MODEL, c1)), ("hybrid", hybrid)):
            for metric, flag in (("", False), ("_rms", True)):
                r = compute_errors(law, f, S, D, [width], rms=flag).at(width)
                row.update({f"{name}_E_S{metric}": r["E_S"], f"{name}_E_D{metric}": r["E_D"],
                            f"{name}_E_tot{metric}": r["E_tot"]})
        rows.append(row)
    return rows


def spread_ratio(values) -> float:
    """Largest over smallest of positive values."""
    v = np.asarray(values, dtype=float)
    return float(v.max() / v.min())
