import json

import numpy as np
import pytest

from hybridfem.dataset import (
    REFERENCE_F,
    GroundTruthCache,
    TrainingRegion,
    analytic_source,
    build_training_set,
    cube_offsets,
    layered_grid_samples,
    lhd_samples,
    load_training_set,
    rve_source,
    save_training_set,
)
from hybridfem.errors import HomogenizationError, HybridFemError, SchemaError
from hybridfem.mechanics import ANALYTIC_LAW_PARAMS, MacroModel, MicroMaterial, macro_model, unpack_tangent

SOURCE = analytic_source(MicroMaterial(ANALYTIC_LAW_PARAMS))


@pytest.mark.parametrize("n_layers,expected", [(2, 53), (4, 105), (6, 157), (8, 209), (10, 261),
                                               (15, 391), (20, 521)])
def test_grid_sizes(n_layers, expected):
    region = TrainingRegion(0.25, n_layers)
    pts = layered_grid_samples(region)
    assert len(pts) == region.n_points == expected
    assert len(np.unique(pts.round(12), axis=0)) == expected
    assert np.all(region.contains(pts))


def test_grid_structure():
    offsets = cube_offsets()
    assert len(offsets) == 26
    # 8 vertices, 12 edge midpoints, 6 face centres
    counts = np.bincount(np.abs(offsets).sum(axis=1).astype(int))
    assert counts.tolist() == [0, 6, 12, 8]
    pts = layered_grid_samples(TrainingRegion(0.1, 2))
    np.testing.assert_array_equal(pts[0], REFERENCE_F)
    np.testing.assert_allclose(np.abs(pts[1:27] - REFERENCE_F).max(axis=1), 0.05)
    np.testing.assert_allclose(np.abs(pts[27:] - REFERENCE_F).max(axis=1), 0.1)
    assert len(layered_grid_samples(TrainingRegion(0.1, 2), center=False)) == 52


def test_lhd_is_stratified_and_seeded():
    region = TrainingRegion(0.25)
    a = lhd_samples(region, 50, seed=3)
    np.testing.assert_array_equal(a, lhd_samples(region, 50, seed=3))
    assert np.all(region.contains(a))
    for k in range(3):
        bins = np.floor((a[:, k] - REFERENCE_F[k] + 0.25) / 0.5 * 50).astype(int)
        assert sorted(bins) == list(range(50))


def test_region_validation():
    with pytest.raises(ValueError):
        TrainingRegion(0.0)
    with pytest.raises(ValueError):
        TrainingRegion(0.1, 0)


def test_remainders_against_macro_model():
    pts = layered_grid_samples(TrainingRegion(0.1, 1))
    ts = build_training_set(pts, SOURCE, 3.0)
    _, S_mod, D_mod = macro_model(ts.c, 3.0)
    np.testing.assert_allclose(ts.s_rem + S_mod, ts.s_true)
    np.testing.assert_allclose(unpack_tangent(ts.d_rem) + D_mod, unpack_tangent(ts.d_true))
    assert ts.outputs.shape == (27, 9) and ts.has_reference() and ts.macro_c1 == 3.0
    base = ts.rebased(0.0)
    np.testing.assert_allclose(base.s_rem, ts.s_true)
    np.testing.assert_allclose(base.rebased(3.0).s_rem, ts.s_rem)


def test_training_set_validation():
    pts = layered_grid_samples(TrainingRegion(0.1, 1))
    with pytest.raises(ValueError, match="reference"):
        build_training_set(pts[1:], SOURCE, 0.0)
    build_training_set(pts[1:], SOURCE, 0.0, require_reference=False)
    with pytest.raises(ValueError, match="distinct"):
        build_training_set(np.vstack([pts, pts[:1]]), SOURCE, 0.0)
    with pytest.raises(ValueError, match="determinant"):
        build_training_set(np.array([[1.0, 1.0, 0.0], [0.5, 0.5, 0.6]]), SOURCE, 0.0)
    ts = build_training_set(pts, SOURCE, 0.0)
    ts.s_true = None
    with pytest.raises(HybridFemError):
        ts.rebased(1.0)


def test_save_load_roundtrip(tmp_path):
    ts = build_training_set(layered_grid_samples(TrainingRegion(0.1, 1)), SOURCE, 2.0, {"source": "analytic"})
    path = tmp_path / "ts.jsonl"
    save_training_set(ts, path)
    back = load_training_set(path)
    for name in ("c", "s_rem", "d_rem", "f_app", "s_true", "d_true"):
        np.testing.assert_array_equal(getattr(back, name), getattr(ts, name))
    assert back.provenance == ts.provenance


def test_corrupt_datasets_are_rejected(tmp_path):
    ts = build_training_set(layered_grid_samples(TrainingRegion(0.1, 1)), SOURCE, 0.0)
    path = tmp_path / "ts.jsonl"
    save_training_set(ts, path)
    lines = path.read_text().splitlines()

    rec = json.loads(lines[3])
    rec["s_rem"][0] += 1e-9
    path.write_text("\n".join(lines[:3] + [json.dumps(rec)] + lines[4:]))
    with pytest.raises(SchemaError, match="hash"):
        load_training_set(path)

    path.write_text("\n".join(lines[:-1]))
    with pytest.raises(SchemaError, match="records"):
        load_training_set(path)

    header = json.loads(lines[0])
    header["version"] = 99
    path.write_text("\n".join([json.dumps(header)] + lines[1:]))
    with pytest.raises(SchemaError, match="version"):
        load_training_set(path)

    path.write_text(lines[0][:-5])
    with pytest.raises(SchemaError):
        load_training_set(path)


class _Counting:
    def __init__(self, fail_on=None):
        self.calls = 0
        self.fail_on = fail_on

    def homogenize(self, F):
        self.calls += 1
        if self.fail_on is not None and np.isclose(F[0, 0], self.fail_on):
            raise HomogenizationError(F, "planted failure")

        class P:
            S = np.array([F[0, 0], F[1, 1], F[0, 1]])
            D = np.eye(3)

        return P


def test_ground_truth_cache_resumes(tmp_path):
    f = np.array([[1.0, 1.0, 0.0], [1.1, 1.0, 0.0]])
    h = _Counting()
    S, _ = rve_source(h, GroundTruthCache(tmp_path, "abc"))(f)
    np.testing.assert_allclose(S, f)
    with open(tmp_path / "rve-abc.jsonl", "a") as fh:
        fh.write('{"f": [1.2, 1.0')  # interrupted write
    cache = GroundTruthCache(tmp_path, "abc")
    assert len(cache) == 2 and f[1] in cache
    rve_source(h, cache)(f)
    assert h.calls == 2


def test_failed_points_are_reported_together():
    h = _Counting(fail_on=1.1)
    f = np.array([[1.1, 1.0, 0.0], [1.0, 1.0, 0.0]])
    with pytest.raises(HomogenizationError, match="1 of 2"):
        rve_source(h)(f)
    assert h.calls == 2


def test_macro_source_has_zero_remainder():
    ts = build_training_set(layered_grid_samples(TrainingRegion(0.2, 2)), analytic_source(MacroModel(4.0)), 4.0)
    assert np.abs(ts.outputs).max() < 1e-12
