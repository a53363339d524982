"""Littlewood-Paley energy packets, barrier covers and box-counting bounds
for the hyperdissipative Navier-Stokes equations on the periodic box."""

__version__ = "0.1.0"

from .errors import (BandRangeError, BarrierNotFoundError, BlowUpError, ConfigError, DomainError,
                     PkrgError, PreconditionError, ResolutionError, SymmetryError)
from .spectral_field import FrequencyGrid, SpectralField, leray_project
from .littlewood_paley import project, single
from .solver import SolverConfig, run
from .packets import Cube, packet_norm
from .dimension import bound_hausdorff, bound_naive, bound_refined

__all__ = [
    "BandRangeError", "BarrierNotFoundError", "BlowUpError", "ConfigError", "DomainError",
    "PkrgError", "PreconditionError", "ResolutionError", "SymmetryError",
    "FrequencyGrid", "SpectralField", "leray_project", "project", "single", "SolverConfig", "run", "Cube",
    "packet_norm", "bound_hausdorff", "bound_naive", "bound_refined",
]
