import numpy as np
import pytest

from hybridfem.dataset import TrainingRegion, analytic_source, build_training_set, layered_grid_samples
from hybridfem.errors import HybridFemError
from hybridfem.hybrid import HybridLaw, Mode
from hybridfem.kriging import fit_training_set
from hybridfem.mechanics import ANALYTIC_LAW_PARAMS, MicroMaterial, macro_model
from hybridfem.pso import PsoConfig

FAST = PsoConfig(particles=12, iterations=25, pattern_steps=40)
TRUTH = MicroMaterial(ANALYTIC_LAW_PARAMS)


@pytest.fixture(scope="module")
def models():
    pts = layered_grid_samples(TrainingRegion(0.1, 2))
    ts = build_training_set(pts, analytic_source(TRUTH), 1.0)
    return ts, fit_training_set(ts, config=FAST), fit_training_set(ts.rebased(0.0), config=FAST)


def test_modes_reproduce_training_data(models):
    ts, hyb, data = models
    for law in (HybridLaw("hybrid", 1.0, hyb), HybridLaw(Mode.DATA, 5.0, data)):
        S, D = law.response(ts.c)
        np.testing.assert_allclose(S, ts.s_true, atol=1e-8 * np.abs(ts.s_true).max())
    assert HybridLaw("data", 5.0, data).macro.C1 == 0.0


def test_model_mode_is_macro_law(models):
    ts = models[0]
    law = HybridLaw("model", 1.0)
    _, S, D = macro_model(ts.c, 1.0)
    ev = law.evaluate(ts.c, bands=True)
    np.testing.assert_array_equal(ev.S, S)
    np.testing.assert_array_equal(ev.S_lower, S)
    assert np.all(law.remainder(ts.c) == 0.0)


def test_macro_parameter_mismatch_is_rejected(models):
    _, hyb, _ = models
    with pytest.raises(HybridFemError, match="C1"):
        HybridLaw("hybrid", 2.0, hyb)
    HybridLaw("hybrid", 2.0, hyb, check_c1=False)
    with pytest.raises(HybridFemError):
        HybridLaw("hybrid", 1.0)
    with pytest.raises(ValueError):
        HybridLaw("other", 1.0)


def test_tangent_is_symmetric_and_bands_bracket(models):
    ts, hyb, _ = models
    law = HybridLaw("hybrid", 1.0, hyb)
    C = ts.c[:5] * 1.01
    ev = law.evaluate(C, bands=True)
    np.testing.assert_array_equal(ev.D, np.swapaxes(ev.D, 1, 2))
    assert np.all(ev.S_lower <= ev.S) and np.all(ev.S <= ev.S_upper)
