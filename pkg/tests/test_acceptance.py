"""Acceptance criteria for the full pipeline on the seeded reference RVE.

Ground truth and Kriging fits are memoized under ``.cache`` at the
repository root (or ``HYBRIDFEM_CACHE``), so only the first run is slow.
Each test records one line in the terminal summary.
"""

import os
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE, random_f
from hybridfem.dataset import TrainingRegion, analytic_source, layered_grid_samples
from hybridfem.kriging import load_model
from hybridfem.mechanics import (
    ANALYTIC_LAW_PARAMS,
    F_COMPONENTS,
    INCLUSION_PARAMS,
    MATRIX_PARAMS,
    MicroMaterialParams,
    fd_tangent,
    macro_model,
    micro_material,
    right_cauchy_green,
)
from hybridfem.rve import Homogenizer, RveSpec, hill_mandel_gap
from hybridfem.studies import designs, benchmarks, calibration, patch, sweeps
from hybridfem.studies.common import N_LAYERS_SWEEP, REFERENCE_RVE, Workspace

pytestmark = pytest.mark.acceptance

CACHE = Path(os.environ.get("HYBRIDFEM_CACHE", Path(__file__).resolve().parents[1] / ".cache"))
WIDTH = 0.25
N_LAYERS = 10
# every Kriging model fitted by this module, checked by the exactness criterion
FITTED: list = []


def record(n: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[n] = (bool(passed), detail)
    assert passed, detail


@pytest.fixture(scope="module")
def ws():
    return Workspace(spec=REFERENCE_RVE, cache_dir=CACHE)


@pytest.fixture(scope="module")
def c1_fit(ws):
    return calibration.calibrate_c1(ws.ground_truth).c1


@pytest.fixture(scope="module")
def homogenizer(ws):
    return ws.homogenizer


def _track(law):
    if law.model is not None:
        FITTED.append(law.model)
    return law


def test_criterion_01_patch_test(ws, c1_fit):
    rng = np.random.default_rng(11)
    Fs = np.eye(2) + rng.uniform(-0.1, 0.1, size=(10, 2, 2))
    worst = {}
    for mode in ("model", "data", "hybrid"):
        law = _track(ws.law(mode, WIDTH, N_LAYERS, c1_fit))
        worst[mode] = max(patch.run_patch_test(F, law).spread for F in Fs)
    detail = "max Gauss-point spread " + ", ".join(f"{m}={v:.1e}" for m, v in worst.items()) + " (< 1e-8)"
    record(1, max(worst.values()) < 1e-8, detail)


def test_criterion_03_tangent_oracles(homogenizer):
    rng = np.random.default_rng(33)
    laws = {"matrix": lambda C: micro_material(C, MATRIX_PARAMS),
            "inclusion": lambda C: micro_material(C, INCLUSION_PARAMS),
            "analytic": lambda C: micro_material(C, ANALYTIC_LAW_PARAMS),
            "macro": lambda C: macro_model(C, 3.704)}
    C = right_cauchy_green(random_f(rng, 100, 0.25))
    mat = {}
    for name, law in laws.items():
        D = law(C)[2]
        D_fd = fd_tangent(lambda c: law(c)[1], C)
        mat[name] = float((np.linalg.norm(D - D_fd, axis=(1, 2)) / np.linalg.norm(D, axis=(1, 2))).max())

    h = 1e-5
    sens = 0.0
    for F in np.eye(2) + rng.uniform(-0.1, 0.1, size=(10, 2, 2)):
        p = homogenizer.homogenize(F, symmetric=False)
        A_fd = np.empty((4, 4))
        for q, (k, L) in enumerate(F_COMPONENTS):
            dF = np.zeros((2, 2))
            dF[k, L] = h
            dP = (homogenizer.homogenize(F + dF, symmetric=False).P_avg
                  - homogenizer.homogenize(F - dF, symmetric=False).P_avg) / (2 * h)
            A_fd[:, q] = [dP[i, J] for i, J in F_COMPONENTS]
        sens = max(sens, float(np.linalg.norm(p.A - A_fd) / np.linalg.norm(p.A)))
    detail = ("material tangents " + ", ".join(f"{k}={v:.1e}" for k, v in mat.items())
              + f" (< 1e-5); homogenized A vs FD {sens:.1e} (< 1e-4)")
    record(3, max(mat.values()) < 1e-5 and sens < 1e-4, detail)


def test_criterion_04_hill_mandel(homogenizer):
    rng = np.random.default_rng(44)
    gaps = []
    for F in np.eye(2) + rng.uniform(-0.1, 0.1, size=(10, 2, 2)):
        res, _, _ = homogenizer.solve(F)
        du = homogenizer.sensitivity(res) @ rng.normal(size=4)
        free = homogenizer.problem.free
        du[free] += rng.normal(scale=1e-2, size=len(free))
        gaps.append(hill_mandel_gap(homogenizer.problem, res.u, du))
    record(4, max(gaps) < 1e-8, f"max relative virtual-work gap {max(gaps):.1e} over 10 states (< 1e-8)")


def test_criterion_05_sample_counts():
    counts = [len(layered_grid_samples(TrainingRegion(WIDTH, n))) for n in N_LAYERS_SWEEP]
    expected = [53, 105, 157, 209, 261, 391, 521]
    record(5, counts == expected, f"n_tp={counts}")


def test_criterion_06_error_plateau(ws, c1_fit):
    rows = sweeps.density_sweep(ws, WIDTH, N_LAYERS_SWEEP, c1_fit)
    for n in N_LAYERS_SWEEP:
        for mode in ("hybrid", "data"):
            _track(ws.law(mode, WIDTH, n, c1_fit))
    by = {(r["n_tp"], r["mode"]): r for r in rows}
    n_tps = sorted({r["n_tp"] for r in rows})
    plateau = all(by[(n, "hybrid")]["E_tot"] <= 0.035 for n in n_tps if n > 157)
    ordered = all(by[(n, "hybrid")]["E_tot"] < by[(n, "data")]["E_tot"] for n in n_tps)
    table = "; ".join(f"{n}: hyb {by[(n, 'hybrid')]['E_tot']:.2e}/{by[(n, 'hybrid')]['E_tot_rms']:.2e} "
                      f"data {by[(n, 'data')]['E_tot']:.2e}/{by[(n, 'data')]['E_tot_rms']:.2e}"
                      for n in n_tps)
    record(6, plateau and ordered, f"C1={c1_fit:.3f} E_tot plain/rms by n_tp [{table}]")


def test_criterion_07_c1_robustness(ws, c1_fit):
    rows = sweeps.c1_sweep(ws, c1_fit, width=WIDTH, n_layers=N_LAYERS)
    base = ws.grid_set(WIDTH, N_LAYERS, 0.0)
    for r in rows:
        FITTED.append(ws.model(base.rebased(r["C1"])))
    hyb = sweeps.spread_ratio([r["hybrid_E_S"] for r in rows])
    mod = sweeps.spread_ratio([r["model_E_S"] for r in rows])
    detail = (f"hybrid E_S max/min {hyb:.2f} (< 3), model E_S max/min {mod:.2f} (> 5); "
              + ", ".join(f"{r['factor']:g}x: {r['hybrid_E_S']:.2e}/{r['model_E_S']:.2e}" for r in rows))
    record(7, hyb < 3 and mod > 5, detail)


def test_criterion_08_structural_robustness(ws, c1_fit):
    def run(mode, width):
        law = _track(ws.law(mode, width, N_LAYERS, c1_fit))
        return benchmarks.run_benchmark("compression", law, target=1.5, steps=20, mode="adaptive",
                                        keep_fields=False)

    data5, hyb5, hyb15 = run("data", 0.05), run("hybrid", 0.05), run("hybrid", 0.15)
    model = run("model", 0.05)
    a = data5.last_load < hyb5.last_load
    b = hyb15.last_load > hyb5.last_load
    ipi = benchmarks.ipi_at(hyb5.report, model.report, data5.last_load)
    c = 0.8 <= ipi <= 1.5
    detail = (f"last load data5={data5.last_load:.3f} hyb5={hyb5.last_load:.3f} hyb15={hyb15.last_load:.3f} "
              f"model={model.last_load:.3f}; (a) {a} (b) {b} (c) IPI={ipi:.3f} {c}")
    record(8, a and b and c, detail)


def test_criterion_09_sampling_designs():
    res = designs.run_design_study()
    FITTED.extend(r.model for r in res.values())
    s2, s3 = res[2].stress_at_identity, res[3].stress_at_identity
    with_centre = s2 < 1e-8
    without = s3 > 10 * max(s2, 1e-8)
    keys = ("E_S", "E_D", "E_tot")
    le = {k: bool(np.all(getattr(res[5].errors, k) <= getattr(res[2].errors, k))) for k in keys}
    detail = (f"|S(I)| with centre {s2:.1e} (< 1e-8), without {s3:.1e}; scenario 5 <= 2 at all "
              f"{len(res[2].errors.lambdas)} widths: " + ", ".join(f"{k} {v}" for k, v in le.items()))
    record(9, with_centre and without and le["E_tot"], detail)


def test_criterion_10_calibration(ws, c1_fit):
    planted = 2.0
    spec = RveSpec(n_inclusions=0, target_elements=800, matrix=MicroMaterialParams(planted, 0.0, 0.0, 0.0))
    h = Homogenizer(spec)

    def source(f):
        out = [h.homogenize(np.array([[a, c], [c, b]])) for a, b, c in f]
        return np.array([p.S for p in out]), np.array([p.D for p in out])

    recovered = calibration.calibrate_c1(source).c1
    ok_planted = abs(recovered - planted) < 1e-3
    ok_table = 2.6 <= c1_fit <= 4.8
    detail = f"planted {planted} -> {recovered:.6f}; reference RVE C1_fit={c1_fit:.3f} (in [2.6, 4.8]: {ok_table})"
    record(10, ok_planted and ok_table, detail)


def test_criterion_02_kriging_exactness():
    """Runs after the other criteria so it covers every model they fitted."""
    if not FITTED:
        models = [load_model(p) for p in sorted((CACHE / "models").glob("kriging-*.json"))]
    else:
        models = FITTED
    if not models:
        pytest.skip("no fitted models")
    worst_err, worst_var = 0.0, 0.0
    for m in models:
        c = m.x_lo + m.x * m.x_span
        y = m.y_mean + m.y_std * m.y
        mean, var = m.predict(c, variance=True)
        err = np.abs(mean - y).max(axis=0) / np.maximum(np.abs(y).max(axis=0), 1e-300)
        worst_err = max(worst_err, float(err.max()))
        worst_var = max(worst_var, float((var / m.sigma2).max()))
    detail = (f"{len(models)} models: max relative interpolation error {worst_err:.1e} (< 1e-6), "
              f"max variance/sigma2 at training points {worst_var:.1e} (< 1e-8)")
    record(2, worst_err < 1e-6 and worst_var < 1e-8, detail)
