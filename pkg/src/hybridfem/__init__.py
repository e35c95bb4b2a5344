"""Hybrid model/data-driven hyperelasticity with Kriging-corrected constitutive laws."""

from .hybrid import HybridLaw, Mode
from .kriging import KrigingModel, fit, load_model, save_model
from .mechanics import MacroModelParams, MicroMaterialParams
from .rve import Homogenizer, RveSpec

__version__ = "0.1.0"

__all__ = ["HybridLaw", "Mode", "KrigingModel", "fit", "load_model", "save_model",
           "MacroModelParams", "MicroMaterialParams", "Homogenizer", "RveSpec"]
