"""Relaxed variable-step IMEX-BDF simulation of the Cahn-Hilliard-Brinkman system."""

from chbflow.spectral import SpectralGrid, make_grid
from chbflow.model import PhysicalParams, ConstantMobility, PecletMobility, Buoyancy, FieldState
from chbflow.stepper import History, Stepper, StepOutcome, relax
from chbflow.kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = [
    "SpectralGrid", "make_grid", "PhysicalParams", "ConstantMobility", "PecletMobility",
    "Buoyancy", "FieldState", "History", "Stepper", "StepOutcome", "relax", "KERNEL_BACKEND",
]
