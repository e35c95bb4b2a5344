"""Reference settings shared by the studies and an on-disk workspace.

The workspace memoizes the expensive artifacts of a study: homogenized
ground truth per RVE realization and fitted Kriging models per training
set, so that repeated runs and overlapping studies share work.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dataset import (
    GroundTruthCache,
    TrainingRegion,
    TrainingSet,
    layered_grid_samples,
    lhd_samples,
    remainder_set,
    rve_source,
)
from ..hybrid import HybridLaw, Mode
from ..kriging import KrigingModel, fit_training_set, load_model, save_model
from ..pso import PsoConfig
from ..rve import Homogenizer, RveSpec

logger = logging.getLogger(__name__)

# reference mesh sizes and loads of the structural benchmarks
PATCH_L = 100.0
COMPRESSION = {"L": 100.0, "H": 50.0, "n_el": 30, "q_bar": 4.0}
COOK = {"L": 480.0, "H": 440.0, "h": 16.0, "n_el": 30, "q_bar": 4.0}

REFERENCE_RVE = RveSpec()
N_LAYERS_SWEEP = (2, 4, 6, 8, 10, 15, 20)
CLOUD_SIZE = 2000
CLOUD_SEED = 7
KRIGING_SEED = 0
C1_FIT_REFERENCE = 3.704


def default_cache_dir() -> Path:
    return Path(os.environ.get("HYBRIDFEM_CACHE", Path.cwd() / ".cache"))


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Workspace:
    """Ground truth and fitted models for one RVE realization."""

    spec: RveSpec = REFERENCE_RVE
    cache_dir: Path = field(default_factory=default_cache_dir)
    pso: PsoConfig = PsoConfig()
    kriging_seed: int = KRIGING_SEED

    def __post_init__(self):
        self.cache_dir = Path(self.cache_dir)
        self.truth = GroundTruthCache(self.cache_dir, self.spec.digest())
        self._homogenizer: Homogenizer | None = None

    @property
    def homogenizer(self) -> Homogenizer:
        if self._homogenizer is None:
            self._homogenizer = Homogenizer(self.spec)
        return self._homogenizer

    def ground_truth(self, f: np.ndarray):
        """Homogenized ``(S, D)`` at triplets ``f``, solving only uncached points."""
        f = np.atleast_2d(np.asarray(f, dtype=float))
        missing = [t for t in f if t not in self.truth]
        if missing:
            logger.info("homogenizing %d new points", len(missing))
            rve_source(self.homogenizer, self.truth)(np.array(missing))
        S = np.array([self.truth.get(t)[0] for t in f]).reshape(len(f), 3)
        D = np.array([self.truth.get(t)[1] for t in f]).reshape(len(f), 3, 3)
        return S, D

    def grid_set(self, width: float, n_layers: int, macro_c1: float, center: bool = True) -> TrainingSet:
        region = TrainingRegion(width, n_layers)
        f = layered_grid_samples(region, center=center)
        S, D = self.ground_truth(f)
        prov = {"rve": self.spec.to_dict(), "rve_digest": self.spec.digest(),
                "design": "layered-grid", "center": center, **region.to_dict()}
        return remainder_set(f, S, D, macro_c1, prov)

    def reference_cloud(self, width: float, n: int = CLOUD_SIZE, seed: int = CLOUD_SEED):
        """LHD triplets over the cube of half-width ``width`` with their ground truth."""
        f = lhd_samples(TrainingRegion(width), n, seed)
        S, D = self.ground_truth(f)
        return f, S, D

    def model(self, ts: TrainingSet) -> KrigingModel:
        """Kriging fit of a training set, memoized on its content."""
        key = _hash({"records": [np.round(ts.c, 14).tolist(), np.round(ts.outputs, 14).tolist()],
                     "macro_c1": ts.macro_c1, "pso": self.pso.__dict__, "seed": self.kriging_seed})
        path = self.cache_dir / "models" / f"kriging-{key}.json"
        if path.exists():
            return load_model(path)
        model = fit_training_set(ts, seed=self.kriging_seed, config=self.pso)
        path.parent.mkdir(parents=True, exist_ok=True)
        save_model(model, path)
        return model

    def law(self, mode: Mode | str, width: float, n_layers: int, macro_c1: float) -> HybridLaw:
        mode = Mode(mode)
        if mode is Mode.MODEL:
            return HybridLaw(mode, macro_c1)
        c1 = 0.0 if mode is Mode.DATA else macro_c1
        return HybridLaw(mode, c1, self.model(self.grid_set(width, n_layers, c1)))
