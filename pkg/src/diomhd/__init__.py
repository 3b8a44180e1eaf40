"""Pseudo-spectral toolkit for compressible resistive MHD perturbations of a
constant magnetic background on the periodic unit cube."""

from __future__ import annotations

from .diagnostics import EnergyMonitor, OrderParams, decay_fit, energy_identity, energy_report
from .diophantine import DioVector, empirical_constants, margin_report
from .linear import band_spectrum_scan, evolve_linear
from .pressure import PressureLaw, power_law
from .solver import RunResult, SolverConfig, random_initial_data, rhs, run, step
from .spectral import Grid3, SpectralField, VectorSpectralField
from .state import PerturbationState

__all__ = [
    "DioVector",
    "EnergyMonitor",
    "Grid3",
    "OrderParams",
    "PerturbationState",
    "PressureLaw",
    "RunResult",
    "SolverConfig",
    "SpectralField",
    "VectorSpectralField",
    "band_spectrum_scan",
    "decay_fit",
    "empirical_constants",
    "energy_identity",
    "energy_report",
    "evolve_linear",
    "margin_report",
    "power_law",
    "random_initial_data",
    "rhs",
    "run",
    "step",
]
