"""Constitutive law combining the macro model with a Kriging remainder."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import HybridFemError
from .kriging import KrigingModel
from .mechanics import MacroModelParams, macro_model, unpack_tangent


class Mode(str, Enum):
    MODEL = "model"
    DATA = "data"
    HYBRID = "hybrid"


@dataclass
class Evaluation:
    S: np.ndarray
    D: np.ndarray
    S_lower: np.ndarray | None = None
    S_upper: np.ndarray | None = None


class HybridLaw:
    """``S = S_mod + S_rem`` and ``D = D_mod + D_rem`` with Kriging remainders.

    ``model`` mode uses the macro law alone; ``data`` mode uses the Kriging
    prediction alone (macro parameter zero); ``hybrid`` uses both. The
    Kriging model must have been trained on remainders against the same
    macro parameter, which is checked through the model metadata.
    """

    def __init__(self, mode: Mode | str, macro: MacroModelParams | float = 0.0,
                 model: KrigingModel | None = None, check_c1: bool = True):
        self.mode = Mode(mode)
        c1 = macro.C1 if isinstance(macro, MacroModelParams) else float(macro)
        if self.mode is Mode.DATA:
            c1 = 0.0
        self.macro = MacroModelParams(c1)
        if self.mode is not Mode.MODEL:
            if model is None:
                raise HybridFemError(f"mode {self.mode.value!r} needs a Kriging model")
            if model.n_outputs != 9 or model.n_inputs != 3:
                raise HybridFemError("Kriging model must map 3 inputs to 9 outputs")
            trained = model.meta.get("macro_c1")
            if check_c1 and trained is not None and not np.isclose(float(trained), c1, rtol=1e-12, atol=1e-14):
                raise HybridFemError(f"model trained against C1={trained}, law uses C1={c1}")
        self.model = model

    def evaluate(self, C: np.ndarray, bands: bool = False, level: float = 0.95) -> Evaluation:
        """Stress and symmetrized tangent at Voigt ``C (n, 3)``; optional stress CI bands."""
        C = np.atleast_2d(np.asarray(C, dtype=float))
        _, S, D = macro_model(C, self.macro)
        if self.mode is Mode.MODEL:
            return Evaluation(S, D, S.copy() if bands else None, S.copy() if bands else None)
        y = self.model.predict_mean(C)
        D_rem = unpack_tangent(y[:, 3:])
        S = S + y[:, :3]
        D = D + D_rem
        if not bands:
            return Evaluation(S, D)
        lo, hi = self.model.confidence_interval(C, level)
        half = 0.5 * (hi[:, :3] - lo[:, :3])
        return Evaluation(S, D, S - half, S + half)

    def response(self, C: np.ndarray):
        ev = self.evaluate(C)
        return ev.S, ev.D

    def remainder(self, C: np.ndarray) -> np.ndarray:
        """Raw Kriging mean ``(n, 9)``; zeros in model mode."""
        C = np.atleast_2d(np.asarray(C, dtype=float))
        if self.mode is Mode.MODEL:
            return np.zeros((len(C), 9))
        return self.model.predict_mean(C)
