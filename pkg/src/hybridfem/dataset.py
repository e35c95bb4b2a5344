"""Training regions, sampling, remainder datasets and their persistence.

Samples live in the space of symmetric deformation gradients
``(F11, F22, F12)`` with ``F21 = F12``. The Kriging inputs are the Voigt
right Cauchy-Green tensors of those samples, the outputs are the remainders
between a ground-truth response and the macro model.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import HomogenizationError, HybridFemError, SchemaError
from .mechanics import (
    MacroModelParams,
    macro_model,
    pack_tangent,
    right_cauchy_green,
    unpack_tangent,
)

logger = logging.getLogger(__name__)

SCHEMA = "hybridfem.dataset"
VERSION = 1
REFERENCE_F = np.array([1.0, 1.0, 0.0])

# 8 vertices, 12 edge midpoints, 6 face centres of the cube [-1, 1]^3
_OFFSETS = np.array([o for o in np.ndindex(3, 3, 3) if o != (1, 1, 1)], dtype=float) - 1.0


def cube_offsets() -> np.ndarray:
    """The 26 unit offsets of one layer, in a fixed order."""
    return _OFFSETS.copy()


def f_from_triplet(f: Sequence[float]) -> np.ndarray:
    f11, f22, f12 = f
    return np.array([[f11, f12], [f12, f22]], dtype=float)


def triplet_from_f(F: np.ndarray) -> np.ndarray:
    return np.array([F[0, 0], F[1, 1], F[0, 1]], dtype=float)


@dataclass(frozen=True)
class TrainingRegion:
    """Cube of half-width ``width`` around the reference in ``(F11, F22, F12)``."""

    width: float
    n_layers: int = 1

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("training width must be positive")
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")

    @property
    def spacing(self) -> float:
        return self.width / self.n_layers

    @property
    def n_points(self) -> int:
        return 26 * self.n_layers + 1

    def contains(self, f: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Whether triplets ``(..., 3)`` lie inside the cube."""
        f = np.asarray(f, dtype=float)
        return np.all(np.abs(f - REFERENCE_F) <= self.width + tol, axis=-1)

    def to_dict(self) -> dict:
        return {"width": self.width, "n_layers": self.n_layers}


def layered_grid_samples(region: TrainingRegion, center: bool = True) -> np.ndarray:
    """Layered-grid triplets ``(n, 3)``: the reference point, then 26 per layer.

    Layer ``l`` is the cube of half-width ``l * spacing`` sampled at its
    vertices, edge midpoints and face centres.
    """
    layers = [REFERENCE_F + l * region.spacing * _OFFSETS for l in range(1, region.n_layers + 1)]
    pts = np.vstack(([REFERENCE_F] if center else []) + layers)
    return pts


def lhd_samples(region: TrainingRegion, n: int, seed: int) -> np.ndarray:
    """Latin-hypercube triplets ``(n, 3)`` filling the region's cube."""
    if n < 1:
        raise ValueError("n must be >= 1")
    unit = qmc.LatinHypercube(d=3, seed=np.random.default_rng(seed)).random(n)
    return REFERENCE_F + region.width * (2.0 * unit - 1.0)


ResponseFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
"""Maps triplets ``(n, 3)`` to Voigt stresses ``(n, 3)`` and tangents ``(n, 3, 3)``."""


def analytic_source(law) -> ResponseFn:
    """Ground truth from a closed-form law with ``.response(C)``."""

    def respond(f: np.ndarray):
        C = right_cauchy_green(np.stack([f_from_triplet(t) for t in np.atleast_2d(f)]))
        return law.response(C)

    return respond


class GroundTruthCache:
    """Append-only on-disk store of homogenized responses keyed by ``F_app``.

    One JSON-lines file per RVE digest; each line holds ``f``, ``s`` and the
    packed tangent ``d``. Lines are flushed as soon as a point is solved so an
    interrupted sweep resumes where it stopped.
    """

    def __init__(self, directory: str | os.PathLike, digest: str):
        self.path = Path(directory) / f"rve-{digest}.jsonl"
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._store: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        if self.path.exists():
            with open(self.path) as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        rec = json.loads(line)
                    except json.JSONDecodeError:
                        logger.warning("skipping truncated cache line in %s", self.path)
                        continue
                    self._store[self.key(rec["f"])] = (np.array(rec["s"]), unpack_tangent(np.array(rec["d"])))

    @staticmethod
    def key(f: Sequence[float]) -> str:
        return ",".join(f"{x:.12f}" for x in np.asarray(f, dtype=float) + 0.0)

    def __contains__(self, f) -> bool:
        return self.key(f) in self._store

    def __len__(self) -> int:
        return len(self._store)

    def get(self, f):
        return self._store[self.key(f)]

    def put(self, f, S: np.ndarray, D: np.ndarray) -> None:
        f = np.asarray(f, dtype=float)
        self._store[self.key(f)] = (np.asarray(S, dtype=float), np.asarray(D, dtype=float))
        with open(self.path, "a") as fh:
            fh.write(json.dumps({"f": f.tolist(), "s": np.asarray(S).tolist(),
                                 "d": pack_tangent(np.asarray(D)).tolist()}) + "\n")


def rve_source(homogenizer, cache: GroundTruthCache | None = None,
               progress: Callable[[int, int], None] | None = None) -> ResponseFn:
    """Ground truth from RVE homogenization, optionally memoized on disk.

    Failures are collected and raised together after every point was tried.
    """

    def respond(f: np.ndarray):
        f = np.atleast_2d(np.asarray(f, dtype=float))
        S = np.empty((len(f), 3))
        D = np.empty((len(f), 3, 3))
        failed = []
        for i, t in enumerate(f):
            if cache is not None and t in cache:
                S[i], D[i] = cache.get(t)
                continue
            try:
                p = homogenizer.homogenize(f_from_triplet(t))
            except HomogenizationError as exc:
                failed.append((t.tolist(), str(exc)))
                continue
            S[i], D[i] = p.S, p.D
            if cache is not None:
                cache.put(t, p.S, p.D)
            if progress is not None:
                progress(i + 1, len(f))
        if failed:
            raise HomogenizationError(failed[0][0], f"{len(failed)} of {len(f)} samples failed; "
                                                    f"first: {failed[0][1]}")
        return S, D

    return respond


@dataclass
class TrainingSet:
    """Kriging training data: Voigt C inputs and 9 remainder outputs per sample.

    ``s_true``/``d_true`` keep the ground truth so that a set can be re-based
    on another macro model without new solves.
    """

    c: np.ndarray
    s_rem: np.ndarray
    d_rem: np.ndarray
    f_app: np.ndarray
    s_true: np.ndarray | None = None
    d_true: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.c)
        self.c = np.asarray(self.c, dtype=float).reshape(n, 3)
        self.s_rem = np.asarray(self.s_rem, dtype=float).reshape(n, 3)
        self.d_rem = np.asarray(self.d_rem, dtype=float).reshape(n, 6)
        self.f_app = np.asarray(self.f_app, dtype=float).reshape(n, 3)
        if self.s_true is not None:
            self.s_true = np.asarray(self.s_true, dtype=float).reshape(n, 3)
            self.d_true = np.asarray(self.d_true, dtype=float).reshape(n, 6)

    def __len__(self) -> int:
        return len(self.c)

    @property
    def outputs(self) -> np.ndarray:
        """``(n, 9)``: three stress remainders then six packed tangent remainders."""
        return np.hstack([self.s_rem, self.d_rem])

    @property
    def macro_c1(self) -> float:
        return float(self.provenance.get("macro_c1", 0.0))

    def has_reference(self) -> bool:
        return bool(np.any(np.all(self.f_app == REFERENCE_F, axis=1)))

    def rebased(self, macro: MacroModelParams | float) -> "TrainingSet":
        """Same samples with remainders taken against another macro model."""
        if self.s_true is None:
            raise HybridFemError("training set carries no ground truth to rebase")
        return remainder_set(self.f_app, self.s_true, unpack_tangent(self.d_true), macro,
                             {**self.provenance})

    def records(self) -> list[dict]:
        out = []
        for i in range(len(self)):
            rec = {"c": self.c[i].tolist(), "s_rem": self.s_rem[i].tolist(), "d_rem": self.d_rem[i].tolist(),
                   "f_app": self.f_app[i].tolist(), "meta": {"index": i}}
            if self.s_true is not None:
                rec["s_rve"] = self.s_true[i].tolist()
                rec["d_rve"] = self.d_true[i].tolist()
            out.append(rec)
        return out


def remainder_set(f: np.ndarray, S: np.ndarray, D: np.ndarray, macro: MacroModelParams | float,
                  provenance: dict | None = None) -> TrainingSet:
    """Remainders ``S - S_mod`` and ``D - D_mod`` at the Cauchy-Green tensors of ``f``."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    C1 = macro.C1 if isinstance(macro, MacroModelParams) else float(macro)
    C = right_cauchy_green(np.stack([f_from_triplet(t) for t in f])) if len(f) else np.zeros((0, 3))
    if len(f):
        _, S_mod, D_mod = macro_model(C, C1)
    else:
        S_mod, D_mod = np.zeros((0, 3)), np.zeros((0, 3, 3))
    prov = dict(provenance or {})
    prov["macro_c1"] = C1
    return TrainingSet(c=C, s_rem=S - S_mod, d_rem=pack_tangent(D - D_mod), f_app=f,
                       s_true=S, d_true=pack_tangent(D), provenance=prov)


def build_training_set(samples: np.ndarray, source: ResponseFn, macro: MacroModelParams | float,
                       provenance: dict | None = None, require_reference: bool = True) -> TrainingSet:
    """Evaluate the ground truth at every sample and subtract the macro model."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if len(samples) and len(np.unique(samples, axis=0)) != len(samples):
        raise ValueError("training samples must be pairwise distinct")
    if require_reference and not np.any(np.all(samples == REFERENCE_F, axis=1)):
        raise ValueError("training samples must contain the reference configuration")
    dets = samples[:, 0] * samples[:, 1] - samples[:, 2] ** 2
    if np.any(dets <= 0):
        raise ValueError("inadmissible sample with non-positive determinant")
    S, D = source(samples) if len(samples) else (np.zeros((0, 3)), np.zeros((0, 3, 3)))
    return remainder_set(samples, S, D, macro, provenance)


def _digest(provenance: dict, records: Iterable[dict]) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(provenance, sort_keys=True).encode())
    for rec in records:
        h.update(json.dumps(rec, sort_keys=True).encode())
    return h.hexdigest()


def save_training_set(ts: TrainingSet, path: str | os.PathLike) -> None:
    records = ts.records()
    header = {"schema": SCHEMA, "version": VERSION, "n": len(records),
              "provenance": ts.provenance, "sha256": _digest(ts.provenance, records)}
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def load_training_set(path: str | os.PathLike) -> TrainingSet:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise SchemaError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
        records = [json.loads(ln) for ln in lines[1:]]
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: malformed JSON ({exc})") from exc
    if header.get("schema") != SCHEMA:
        raise SchemaError(f"{path}: not a dataset file")
    if header.get("version") != VERSION:
        raise SchemaError(f"{path}: unsupported version {header.get('version')}")
    if header.get("n") != len(records):
        raise SchemaError(f"{path}: expected {header.get('n')} records, found {len(records)}")
    if _digest(header["provenance"], records) != header.get("sha256"):
        raise SchemaError(f"{path}: content hash mismatch")
    n = len(records)
    truth = n > 0 and "s_rve" in records[0]

    def col(key, width):
        return np.array([r[key] for r in records], dtype=float).reshape(n, width)

    return TrainingSet(c=col("c", 3), s_rem=col("s_rem", 3), d_rem=col("d_rem", 6), f_app=col("f_app", 3),
                       s_true=col("s_rve", 3) if truth else None, d_true=col("d_rve", 6) if truth else None,
                       provenance=header["provenance"])


def reference_cloud(f: np.ndarray, provenance: dict | None = None) -> TrainingSet:
    """Reference points in the dataset schema, with empty remainders."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    C = right_cauchy_green(np.stack([f_from_triplet(t) for t in f]))
    n = len(f)
    return TrainingSet(c=C, s_rem=np.zeros((n, 3)), d_rem=np.zeros((n, 6)), f_app=f,
                       provenance={**(provenance or {}), "kind": "reference-cloud"})
