import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_f
from hybridfem.errors import KinematicsError, MaterialError
from hybridfem.mechanics import (
    ANALYTIC_LAW_PARAMS,
    IDENTITY_VOIGT,
    INCLUSION_PARAMS,
    MATRIX_PARAMS,
    MacroModelParams,
    MicroMaterialParams,
    def_gradient,
    expand_first_elasticity,
    fd_tangent,
    first_elasticity,
    flatten_first_elasticity,
    invariants,
    macro_model,
    micro_material,
    pack_tangent,
    right_cauchy_green,
    tensor_to_voigt,
    unpack_tangent,
    voigt_to_tensor,
)

LAWS = {
    "matrix": lambda C: micro_material(C, MATRIX_PARAMS),
    "inclusion": lambda C: micro_material(C, INCLUSION_PARAMS),
    "analytic": lambda C: micro_material(C, ANALYTIC_LAW_PARAMS),
    "macro": lambda C: macro_model(C, 3.7),
}


def energy_stress(psi, C, h=1e-6):
    """S from central differences of the energy in tensor components."""
    S = np.empty(3)
    for j, factor in enumerate((2.0, 2.0, 1.0)):
        dC = np.zeros(3)
        dC[j] = h
        S[j] = factor * (psi(C + dC) - psi(C - dC)) / (2 * h)
    return S


def test_voigt_roundtrip(rng):
    A = rng.normal(size=(5, 2, 2))
    A = A + np.swapaxes(A, 1, 2)
    np.testing.assert_allclose(voigt_to_tensor(tensor_to_voigt(A)), A)
    d = rng.normal(size=(4, 6))
    np.testing.assert_allclose(pack_tangent(unpack_tangent(d)), d)


def test_def_gradient_and_cauchy_green():
    F = def_gradient(1.1, 0.9, 0.2)
    np.testing.assert_allclose(F, [[1.1, 0.2], [0.2, 0.9]])
    np.testing.assert_allclose(right_cauchy_green(F), [1.1**2 + 0.04, 0.81 + 0.04, 1.1 * 0.2 + 0.2 * 0.9])
    with pytest.raises(KinematicsError):
        right_cauchy_green(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_invariants_include_out_of_plane_stretch():
    I1, I2, I3 = invariants(np.array([2.0, 3.0, 0.5]))
    assert I1 == pytest.approx(6.0)
    assert I3 == pytest.approx(5.75)
    assert I2 == pytest.approx(5.75 + 5.0)


@pytest.mark.parametrize("name", sorted(LAWS))
def test_stress_free_reference(name):
    _, S, _ = LAWS[name](IDENTITY_VOIGT)
    np.testing.assert_allclose(S, 0.0, atol=1e-12)


@given(st.lists(st.floats(0.0, 1e3), min_size=4, max_size=4))
@settings(max_examples=50, deadline=None)
def test_any_parameters_are_stress_free(c):
    _, S, _ = micro_material(IDENTITY_VOIGT, MicroMaterialParams(*c))
    assert np.abs(S).max() <= 1e-12 * max(1.0, max(c))


@pytest.mark.parametrize("name", ["matrix", "analytic"])
def test_stress_is_energy_gradient(name, rng):
    law = LAWS[name]
    for F in random_f(rng, 10):
        C = right_cauchy_green(F)
        _, S, _ = law(C)
        S_fd = energy_stress(lambda c: law(c)[0], C)
        np.testing.assert_allclose(S, S_fd, rtol=1e-6, atol=1e-6 * np.abs(S).max())


@pytest.mark.parametrize("name", sorted(LAWS))
def test_tangent_matches_finite_differences(name, rng):
    law = LAWS[name]
    C = right_cauchy_green(random_f(rng, 20, 0.3))
    _, _, D = law(C)
    D_fd = fd_tangent(lambda c: law(c)[1], C)
    err = np.linalg.norm(D - D_fd, axis=(1, 2)) / np.linalg.norm(D, axis=(1, 2))
    assert err.max() < 1e-5
    np.testing.assert_allclose(D, np.swapaxes(D, 1, 2), rtol=1e-13, atol=1e-13 * np.abs(D).max())


def test_small_strain_moduli():
    p = ANALYTIC_LAW_PARAMS
    lam, mu = 4 * (p.c2 + p.c3 + p.c4), 2 * p.c1 + 2 * p.c2
    _, _, D = micro_material(IDENTITY_VOIGT, p)
    np.testing.assert_allclose(D, [[lam + 2 * mu, lam, 0], [lam, lam + 2 * mu, 0], [0, 0, mu]], atol=1e-9)
    _, _, D = macro_model(IDENTITY_VOIGT, 2.5)
    np.testing.assert_allclose(D, np.diag([10.0, 10.0, 5.0]), atol=1e-12)


def test_macro_model_closed_form():
    C = np.array([1.3, 0.8, 0.1])
    det = 1.3 * 0.8 - 0.01
    _, S, _ = macro_model(C, 2.0)
    np.testing.assert_allclose(S, 4.0 * (np.array([1, 1, 0]) - np.array([0.8, 1.3, -0.1]) / det))


def test_inadmissible_state_raises():
    with pytest.raises(MaterialError):
        micro_material(np.array([1.0, 1.0, 1.5]), MATRIX_PARAMS)
    with pytest.raises(ValueError):
        MacroModelParams(-1.0)


def test_first_elasticity_matches_finite_differences(rng):
    p = ANALYTIC_LAW_PARAMS
    F = random_f(rng, 1, 0.2)[0]

    def P(F):
        return F @ voigt_to_tensor(micro_material(right_cauchy_green(F), p)[1])

    _, S, D = micro_material(right_cauchy_green(F), p)
    A = first_elasticity(F, S, D)
    h = 1e-6
    A_fd = np.empty((4, 4))
    comps = ((0, 0), (1, 1), (0, 1), (1, 0))
    for q, (k, L) in enumerate(comps):
        dF = np.zeros((2, 2))
        dF[k, L] = h
        dP = (P(F + dF) - P(F - dF)) / (2 * h)
        A_fd[:, q] = [dP[i, J] for i, J in comps]
    np.testing.assert_allclose(A, A_fd, rtol=1e-6, atol=1e-6 * np.abs(A).max())
    np.testing.assert_allclose(flatten_first_elasticity(expand_first_elasticity(A)), A)
