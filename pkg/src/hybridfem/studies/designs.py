"""Sampling-design studies with a closed-form ground-truth law.

Five designs are compared on the uniaxial path ``F = diag(F11, 1)``:
a 27-point Latin hypercube, the 27-point grid with and without its centre,
the 27-point grid on a half-width region, and the 53-point two-layer grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import TrainingRegion, analytic_source, build_training_set, layered_grid_samples, lhd_samples
from ..hybrid import HybridLaw, Mode
from ..kriging import KrigingModel, fit_training_set
from ..mechanics import ANALYTIC_LAW_PARAMS, IDENTITY_VOIGT, MicroMaterial
from ..pso import PsoConfig
from .metrics import ErrorReport, compute_errors

MACRO_C1 = 1000.0
WIDTH = 0.1

SCENARIOS = {
    1: ("lhd-27", WIDTH),
    2: ("grid-27", WIDTH),
    3: ("grid-26", WIDTH),
    4: ("grid-27", 0.5 * WIDTH),
    5: ("grid-53", WIDTH),
}


def scenario_samples(scenario: int, seed: int = 0) -> np.ndarray:
    design, width = SCENARIOS[scenario]
    if design == "lhd-27":
        return lhd_samples(TrainingRegion(width), 27, seed)
    if design == "grid-26":
        return layered_grid_samples(TrainingRegion(width, 1), center=False)
    layers = 2 if design == "grid-53" else 1
    return layered_grid_samples(TrainingRegion(width, layers))


def uniaxial_cloud(n: int = 201, half_width: float = 0.25) -> np.ndarray:
    v = np.linspace(1.0 - half_width, 1.0 + half_width, n)
    return np.c_[v, np.ones(n), np.zeros(n)]


@dataclass
class ScenarioResult:
    scenario: int
    design: str
    width: float
    n_train: int
    model: KrigingModel
    law: HybridLaw
    errors: ErrorReport
    stress_at_identity: float  # norm of the predicted stress at C = I, divided by the training stress scale


def run_scenario(scenario: int, *, seed: int = 0, lambdas=None, n_path: int = 201,
                 config: PsoConfig = PsoConfig()) -> ScenarioResult:
    design, width = SCENARIOS[scenario]
    truth = MicroMaterial(ANALYTIC_LAW_PARAMS)
    source = analytic_source(truth)
    f = scenario_samples(scenario, seed)
    ts = build_training_set(f, source, MACRO_C1, {"design": design, "width": width, "seed": seed},
                            require_reference=False)
    model = fit_training_set(ts, seed=seed, config=config)
    law = HybridLaw(Mode.HYBRID, MACRO_C1, model)
    cloud = uniaxial_cloud(n_path)
    S_ref, D_ref = source(cloud)
    lambdas = np.linspace(0.01, 0.25, 25) if lambdas is None else np.asarray(lambdas, dtype=float)
    errors = compute_errors(law, cloud, S_ref, D_ref, lambdas)
    S0 = law.evaluate(IDENTITY_VOIGT[None]).S[0]
    scale = np.abs(ts.s_true).max()
    return ScenarioResult(scenario, design, width, len(ts), model, law, errors,
                          float(np.linalg.norm(S0) / scale))


def run_design_study(scenarios=(1, 2, 3, 4, 5), **kw) -> dict[int, ScenarioResult]:
    return {s: run_scenario(s, **kw) for s in scenarios}
