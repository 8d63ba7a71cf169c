"""Fano resonances, non-reflection and perfect reflection in waveguides.

Finite-element scattering in two-dimensional acoustic waveguides with
Neumann walls, trapped-mode search through the augmented scattering matrix,
first-order Fano coefficients, and frequency sweeps that locate zeros of the
reflection and transmission coefficients. A one-dimensional junction model
provides closed-form reference values.
"""
from .errors import (
    ConfigError,
    DomainError,
    FanoguideError,
    MeshError,
    NearResonanceError,
    NotFoundError,
    SolverError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "FanoguideError",
    "MeshError",
    "NearResonanceError",
    "NotFoundError",
    "SolverError",
    "__version__",
]
