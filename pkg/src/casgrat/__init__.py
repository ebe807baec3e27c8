"""Exact thermal Casimir interaction between a sphere and a 1D lamellar grating.

The free energy is a Matsubara sum over log-determinants of the
sphere-grating round-trip operator, assembled from Mie amplitudes on
the imaginary frequency axis, a Fourier-modal grating reflection
matrix, and plane-wave/spherical-wave conversion kernels.  Proximity
force comparators, lateral forces and plateau diagnostics sit on top,
plus a config-driven sweep CLI (``casgrat run``).
"""

from .energy import (ConvergenceError, EnergyResult, PlateauResult,
                     ThermalState, free_energy, lateral_force, normal_force,
                     pfa_double, pfa_single, plane_grating_energy,
                     plane_plane_energy, plane_sphere_free_energy,
                     plateau_observables)
from .materials import (Drude, LorentzOscillators, Tabulated, Vacuum,
                        fused_silica, gold, kk_transform, load_tabulated,
                        permittivity, save_tabulated)
from .mie import MieTable, SphereSpec, mie_coefficients, sphere_planewave_matrix
from .rcwa import (GratingSpec, RcwaError, ReflectionBlock, ReflectionCache,
                   apply_lateral_shift, fresnel_amplitudes, fresnel_reflection,
                   grating_reflection)
from .roundtrip import (RoundTripError, RoundTripMatrix, TruncationSpec,
                        assemble_roundtrip, auto_truncate, load_roundtrip,
                        log_det_one_minus, save_roundtrip)

__all__ = [
    "ConvergenceError", "EnergyResult", "PlateauResult", "ThermalState",
    "free_energy", "lateral_force", "normal_force", "pfa_double",
    "pfa_single", "plane_grating_energy", "plane_plane_energy",
    "plane_sphere_free_energy", "plateau_observables",
    "Drude", "LorentzOscillators", "Tabulated", "Vacuum", "fused_silica",
    "gold", "kk_transform", "load_tabulated", "permittivity",
    "save_tabulated",
    "MieTable", "SphereSpec", "mie_coefficients", "sphere_planewave_matrix",
    "GratingSpec", "RcwaError", "ReflectionBlock", "ReflectionCache",
    "apply_lateral_shift", "fresnel_amplitudes", "fresnel_reflection",
    "grating_reflection",
    "RoundTripError", "RoundTripMatrix", "TruncationSpec",
    "assemble_roundtrip", "auto_truncate", "load_roundtrip",
    "log_det_one_minus", "save_roundtrip",
]

__version__ = "0.1.0"
