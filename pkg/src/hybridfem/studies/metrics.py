"""Range-normalized error measures of a constitutive law over a reference cloud."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataset import REFERENCE_F, f_from_triplet
from ..mechanics import right_cauchy_green

# vec(D) order used for the per-entry tangent errors
D_ENTRIES = tuple((a, b) for a in range(3) for b in range(3))


def component_errors(pred: np.ndarray, ref: np.ndarray, rms: bool = False):
    """Per-column normalized errors of ``pred`` against ``ref`` (both ``(n, m)``).

    The default follows ``(1/n) sqrt(sum (pred - ref)^2) / (max ref - min ref)``;
    ``rms=True`` puts the ``1/n`` inside the root. Columns whose reference
    range vanishes give NaN and are reported as skipped.
    """
    pred = np.asarray(pred, dtype=float)
    ref = np.asarray(ref, dtype=float)
    n = len(ref)
    if n == 0:
        raise ValueError("empty reference set")
    span = ref.max(axis=0) - ref.min(axis=0)
    scale = np.maximum(np.abs(ref).max(axis=0), 1e-300)
    root = np.sqrt(((pred - ref) ** 2).sum(axis=0))
    err = root / np.sqrt(n) if rms else root / n
    degenerate = span <= 1e-12 * scale
    out = np.full(ref.shape[1], np.nan)
    out[~degenerate] = err[~degenerate] / span[~degenerate]
    return out, np.flatnonzero(degenerate)


@dataclass
class ErrorReport:
    """Stress, tangent and total errors over nested control regions."""

    lambdas: np.ndarray
    n_ref: np.ndarray
    E_S_j: np.ndarray  # (n_lambda, 3)
    E_D_j: np.ndarray  # (n_lambda, 9)
    skipped: list = field(default_factory=list)
    rms: bool = False

    @property
    def E_S(self) -> np.ndarray:
        return np.nanmean(self.E_S_j, axis=1)

    @property
    def E_D(self) -> np.ndarray:
        return np.nanmean(self.E_D_j, axis=1)

    @property
    def E_tot(self) -> np.ndarray:
        return 0.5 * (self.E_S + self.E_D)

    def at(self, lam: float) -> dict:
        i = int(np.argmin(np.abs(self.lambdas - lam)))
        return {"lambda": float(self.lambdas[i]), "n_ref": int(self.n_ref[i]), "E_S": float(self.E_S[i]),
                "E_D": float(self.E_D[i]), "E_tot": float(self.E_tot[i])}

    def rows(self) -> list[dict]:
        out = []
        for i, lam in enumerate(self.lambdas):
            row = self.at(lam)
            row.update({f"E_S{j}": float(v) for j, v in enumerate(self.E_S_j[i])})
            row.update({f"E_D{a}{b}": float(v) for (a, b), v in zip(D_ENTRIES, self.E_D_j[i])})
            out.append(row)
        return out


def control_mask(f: np.ndarray, lam: float) -> np.ndarray:
    """Triplets whose symmetric F stays within ``lam`` of the identity componentwise."""
    return np.all(np.abs(np.asarray(f) - REFERENCE_F) < lam + 1e-12, axis=1)


def compute_errors(law, f: np.ndarray, S_ref: np.ndarray, D_ref: np.ndarray, lambdas, *,
                   rms: bool = False) -> ErrorReport:
    """Errors of ``law.response`` against ground truth at triplets ``f``.

    Each control half-width ``lam`` selects the sub-cloud with
    ``|F_ij - delta_ij| < lam``; the stress error averages 3 components and
    the tangent error the 9 entries of ``vec(D)``.
    """
    f = np.atleast_2d(np.asarray(f, dtype=float))
    C = right_cauchy_green(np.stack([f_from_triplet(t) for t in f]))
    S, D = law.response(C)
    D = np.asarray(D).reshape(len(f), 9)
    D_ref = np.asarray(D_ref).reshape(len(f), 9)
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    es, ed, nref, skipped = [], [], [], []
    for lam in lambdas:
        m = control_mask(f, lam)
        if m.sum() < 2:
            raise ValueError(f"control region {lam} holds fewer than two reference points")
        e_s, bad_s = component_errors(S[m], S_ref[m], rms)
        e_d, bad_d = component_errors(D[m], D_ref[m], rms)
        es.append(e_s)
        ed.append(e_d)
        nref.append(int(m.sum()))
        skipped += [(float(lam), "S", int(j)) for j in bad_s] + [(float(lam), "D", int(j)) for j in bad_d]
    return ErrorReport(lambdas, np.array(nref), np.array(es), np.array(ed), skipped, rms)


def stress_error(law, f: np.ndarray, S_ref: np.ndarray, rms: bool = False) -> float:
    """Mean normalized stress error over all points (no tangent)."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    C = right_cauchy_green(np.stack([f_from_triplet(t) for t in f]))
    S, _ = law.response(C)
    e, _ = component_errors(S, S_ref, rms)
    return float(np.nanmean(e))
