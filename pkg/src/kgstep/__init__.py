"""Exact transients of a Klein-Gordon wave released onto a step barrier."""
from .core import (
    C_NM_PER_FS,
    HBAR_C_EV_NM,
    KGStepError,
    ParameterError,
    PropagatingRegimeError,
    Region,
    SpacetimePoint,
    StepParams,
    derive_params,
    energy_to_wavenumber,
    light_cone,
    preset_params,
)
from .exact import ComplexAmplitude, EvalDiagnostics, Method, psi_auto, psi_exact

__version__ = "0.1.0"

__all__ = [
    "C_NM_PER_FS",
    "HBAR_C_EV_NM",
    "ComplexAmplitude",
    "EvalDiagnostics",
    "KGStepError",
    "Method",
    "ParameterError",
    "PropagatingRegimeError",
    "Region",
    "SpacetimePoint",
    "StepParams",
    "derive_params",
    "energy_to_wavenumber",
    "light_cone",
    "preset_params",
    "psi_auto",
    "psi_exact",
]
