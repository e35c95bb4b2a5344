"""Plane-strain kinematics, Voigt mappings and the analytic hyperelastic laws.

Conventions used throughout the package:

* symmetric tensors (C, S, E) are stored as Voigt vectors ``(x11, x22, x12)``
  holding tensor components;
* strain-like vectors used for work conjugacy carry the engineering factor
  on the shear entry, ``E_voigt = (E11, E22, 2 E12)``;
* tangents are 3x3 matrices ``D[a, b] = dS_a / dE_voigt_b`` with rows and
  columns ordered (11, 22, 12);
* every invariant includes the out-of-plane component ``C33 = 1``.

All functions broadcast over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import KinematicsError, MaterialError

IDENTITY_VOIGT = np.array([1.0, 1.0, 0.0])

# vec(F) ordering used by first elasticity tensors and sensitivities
F_COMPONENTS = ((0, 0), (1, 1), (0, 1), (1, 0))

# upper triangle, row major, of the 3x3 Voigt tangent
TANGENT_PACKING = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def def_gradient(F11, F22, F12, F21=None) -> np.ndarray:
    """Assemble ``(..., 2, 2)`` deformation gradients; ``F21`` defaults to ``F12``."""
    F11, F22, F12 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (F11, F22, F12)))
    F21 = F12 if F21 is None else np.broadcast_to(np.asarray(F21, dtype=float), F11.shape)
    F = np.empty(F11.shape + (2, 2))
    F[..., 0, 0] = F11
    F[..., 1, 1] = F22
    F[..., 0, 1] = F12
    F[..., 1, 0] = F21
    return F


def voigt_to_tensor(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    T = np.empty(v.shape[:-1] + (2, 2))
    T[..., 0, 0] = v[..., 0]
    T[..., 1, 1] = v[..., 1]
    T[..., 0, 1] = T[..., 1, 0] = v[..., 2]
    return T


def tensor_to_voigt(T: np.ndarray) -> np.ndarray:
    """Voigt image of a 2x2 tensor; the shear entry is the symmetric part."""
    T = np.asarray(T, dtype=float)
    return np.stack([T[..., 0, 0], T[..., 1, 1], 0.5 * (T[..., 0, 1] + T[..., 1, 0])], axis=-1)


def strain_voigt(E: np.ndarray) -> np.ndarray:
    """Tensor-component strain ``(E11, E22, E12)`` to ``(E11, E22, 2 E12)``."""
    E = np.asarray(E, dtype=float)
    return E * np.array([1.0, 1.0, 2.0])


def pack_tangent(D: np.ndarray) -> np.ndarray:
    """The 6 independent entries of a Voigt tangent, upper triangle row major."""
    D = np.asarray(D)
    return np.stack([D[..., i, j] for i, j in TANGENT_PACKING], axis=-1)


def unpack_tangent(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    D = np.empty(d.shape[:-1] + (3, 3))
    for k, (i, j) in enumerate(TANGENT_PACKING):
        D[..., i, j] = d[..., k]
        D[..., j, i] = d[..., k]
    return D


def symmetrize_tangent(D: np.ndarray) -> np.ndarray:
    return 0.5 * (D + np.swapaxes(D, -1, -2))


def right_cauchy_green(F: np.ndarray) -> np.ndarray:
    """Voigt image of ``C = F^T F`` for ``(..., 2, 2)`` deformation gradients."""
    F = np.asarray(F, dtype=float)
    det = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
    if np.any(~(det > 0.0)):
        raise KinematicsError(f"non-positive det(F): min {np.min(det):.6g}")
    C = np.einsum("...ki,...kj->...ij", F, F)
    return tensor_to_voigt(C)


def green_lagrange(C: np.ndarray) -> np.ndarray:
    """Tensor components of ``E = (C - I) / 2``."""
    return 0.5 * (np.asarray(C, dtype=float) - IDENTITY_VOIGT)


def invariants(C: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(I1, I2, I3)`` of the 3D tensor ``diag(C_2d, 1)``."""
    C = np.asarray(C, dtype=float)
    det2 = C[..., 0] * C[..., 1] - C[..., 2] ** 2
    I1 = C[..., 0] + C[..., 1] + 1.0
    I2 = det2 + C[..., 0] + C[..., 1]
    return I1, I2, det2


def inverse_voigt(C: np.ndarray, I3: np.ndarray | None = None) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    if I3 is None:
        I3 = C[..., 0] * C[..., 1] - C[..., 2] ** 2
    return np.stack([C[..., 1], C[..., 0], -C[..., 2]], axis=-1) / I3[..., None]


def outer_voigt(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Voigt matrix of ``A (x) B`` for symmetric A, B."""
    return a[..., :, None] * b[..., None, :]


def sym_product_voigt(a: np.ndarray) -> np.ndarray:
    """Voigt matrix of ``(A_ik A_jl + A_il A_jk) / 2``, i.e. ``-dA^{-1}/dA`` at ``A^{-1}``."""
    a11, a22, a12 = a[..., 0], a[..., 1], a[..., 2]
    D = np.empty(a.shape[:-1] + (3, 3))
    D[..., 0, 0] = a11 * a11
    D[..., 1, 1] = a22 * a22
    D[..., 0, 1] = D[..., 1, 0] = a12 * a12
    D[..., 0, 2] = D[..., 2, 0] = a11 * a12
    D[..., 1, 2] = D[..., 2, 1] = a22 * a12
    D[..., 2, 2] = 0.5 * (a11 * a22 + a12 * a12)
    return D


_II = outer_voigt(IDENTITY_VOIGT, IDENTITY_VOIGT)
_SYM_I = np.diag([1.0, 1.0, 0.5])


def _check_admissible(I3: np.ndarray) -> None:
    if np.any(~(I3 > 0.0)):
        raise MaterialError(f"inadmissible state, min I3 = {np.min(I3):.6g}")


@dataclass(frozen=True)
class MicroMaterialParams:
    """Coefficients of the phase energy ``c1 I1 + c2 I2 + c3 I3 + c4/2 (I1-3)^2 - c5 log sqrt(I3)``.

    ``c5`` is always derived as ``2 c1 + 4 c2 + 2 c3`` so the reference
    configuration is stress free.
    """

    c1: float
    c2: float
    c3: float
    c4: float

    @property
    def c5(self) -> float:
        return 2.0 * self.c1 + 4.0 * self.c2 + 2.0 * self.c3

    @classmethod
    def uniform(cls, value: float) -> "MicroMaterialParams":
        return cls(value, value, value, value)

    def as_list(self) -> list[float]:
        return [self.c1, self.c2, self.c3, self.c4]


@dataclass(frozen=True)
class MacroModelParams:
    C1: float

    def __post_init__(self):
        if not self.C1 >= 0.0:
            raise ValueError(f"C1 must be non-negative, got {self.C1}")


# RVE phases and the closed-form law of the sampling-design study
MATRIX_PARAMS = MicroMaterialParams.uniform(1.0)
INCLUSION_PARAMS = MicroMaterialParams.uniform(1000.0)
ANALYTIC_LAW_PARAMS = MicroMaterialParams(1000.0, 100.0, 100.0, 100.0)


def micro_material(C: np.ndarray, p: MicroMaterialParams):
    """Energy, 2nd Piola-Kirchhoff stress and Voigt tangent of a micro phase.

    Parameters may be scalars or arrays broadcasting against ``C[..., 0]``.

    Returns:
        ``(psi, S, D)`` with shapes ``(...)``, ``(..., 3)``, ``(..., 3, 3)``.
    """
    C = np.asarray(C, dtype=float)
    I1, I2, I3 = invariants(C)
    _check_admissible(I3)
    c1, c2, c3, c4 = (np.asarray(x, dtype=float) for x in (p.c1, p.c2, p.c3, p.c4))
    c5 = 2.0 * c1 + 4.0 * c2 + 2.0 * c3
    Ci = inverse_voigt(C, I3)

    psi = c1 * I1 + c2 * I2 + c3 * I3 + 0.5 * c4 * (I1 - 3.0) ** 2 - 0.5 * c5 * np.log(I3)

    e = lambda x: np.asarray(x)[..., None]  # noqa: E731
    S = (2.0 * e(c1 + c4 * (I1 - 3.0)) * IDENTITY_VOIGT
         + 2.0 * e(c2) * (e(I1) * IDENTITY_VOIGT - C)
         + e(2.0 * c3 * I3 - c5) * Ci)

    ee = lambda x: np.asarray(x)[..., None, None]  # noqa: E731
    CiCi = outer_voigt(Ci, Ci)
    ICi = sym_product_voigt(Ci)
    D = (4.0 * ee(c2) * (_II - _SYM_I)
         + 4.0 * ee(c3 * I3) * (CiCi - ICi)
         + 4.0 * ee(c4) * _II
         + 2.0 * ee(c5) * ICi)
    return psi, S, D


def macro_model(C: np.ndarray, p: MacroModelParams | float):
    """Modelling component ``C1 [I1 - 2 log sqrt(I3)]``: energy, stress, tangent."""
    C1 = p.C1 if isinstance(p, MacroModelParams) else float(p)
    C = np.asarray(C, dtype=float)
    I1, _, I3 = invariants(C)
    _check_admissible(I3)
    Ci = inverse_voigt(C, I3)
    psi = C1 * (I1 - np.log(I3))
    S = 2.0 * C1 * (IDENTITY_VOIGT - Ci)
    D = 4.0 * C1 * sym_product_voigt(Ci)
    return psi, S, D


def fd_tangent(stress: Callable[[np.ndarray], np.ndarray], C: np.ndarray,
               h: float | None = None) -> np.ndarray:
    """Central-difference tangent ``dS/dE_voigt``; test oracle only.

    Args:
        stress: maps Voigt C ``(..., 3)`` to Voigt S ``(..., 3)``.
        C: state(s) at which to differentiate.
        h: step in E_voigt; defaults to ``1e-6 * max(1, |C|)``.
    """
    C = np.asarray(C, dtype=float)
    if h is None:
        h = 1e-6 * max(1.0, float(np.max(np.linalg.norm(C, axis=-1))))
    if h <= 0:
        raise ValueError("h must be positive")
    # dC = 2 dE with dE_voigt = (dE11, dE22, 2 dE12)
    dC = np.diag([2.0, 2.0, 1.0]) * h
    cols = []
    for j in range(3):
        try:
            sp = stress(C + dC[j])
            sm = stress(C - dC[j])
        except (MaterialError, KinematicsError) as exc:
            raise MaterialError(f"perturbed state inadmissible: {exc}") from exc
        cols.append((np.asarray(sp) - np.asarray(sm)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def fourth_order(D: np.ndarray) -> np.ndarray:
    """Full ``(..., 2, 2, 2, 2)`` tensor from a Voigt tangent (minor symmetries)."""
    idx = np.array([[0, 2], [2, 1]])
    return D[..., idx[:, :, None, None], idx[None, None, :, :]]


def first_elasticity(F: np.ndarray, S: np.ndarray, D: np.ndarray) -> np.ndarray:
    """``dP/dF`` as a 4x4 matrix over vec(F) = (F11, F22, F12, F21).

    ``A_iJkL = delta_ik S_JL + F_iI F_kK D_IJKL``.
    """
    F = np.asarray(F, dtype=float)
    D4 = fourth_order(D)
    S2 = voigt_to_tensor(S)
    A4 = np.einsum("...iI,...kK,...IJKL->...iJkL", F, F, D4)
    A4 = A4 + np.einsum("ik,...JL->...iJkL", np.eye(2), S2)
    return flatten_first_elasticity(A4)


def flatten_first_elasticity(A4: np.ndarray) -> np.ndarray:
    rows = [A4[..., i, J, :, :] for i, J in F_COMPONENTS]
    return np.stack([np.stack([r[..., k, L] for k, L in F_COMPONENTS], axis=-1) for r in rows], axis=-2)


def expand_first_elasticity(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    A4 = np.empty(A.shape[:-2] + (2, 2, 2, 2))
    for p, (i, J) in enumerate(F_COMPONENTS):
        for q, (k, L) in enumerate(F_COMPONENTS):
            A4[..., i, J, k, L] = A[..., p, q]
    return A4


class MicroMaterial:
    """Phase law bound to its parameters, usable as an FE constitutive law."""

    def __init__(self, params: MicroMaterialParams):
        self.params = params

    def response(self, C: np.ndarray):
        _, S, D = micro_material(C, self.params)
        return S, D


class MacroModel:
    def __init__(self, params: MacroModelParams | float):
        self.params = params if isinstance(params, MacroModelParams) else MacroModelParams(float(params))

    def response(self, C: np.ndarray):
        _, S, D = macro_model(C, self.params)
        return S, D
