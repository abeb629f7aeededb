"""Pseudo-spectral tools for the half-wave and semirelativistic NLS equations.

i u_t = A u - u|u|^(p-1) with A = |D| (half-wave) or sqrt(1 - Laplacian)
(semirelativistic), on periodic boxes in one to three dimensions.
"""

from .functionals import Equation, ModelSpec, energy, mass, pohozaev_P, pohozaev_Q
from .spectral import ComplexField, Grid

__all__ = [
    "ComplexField",
    "Equation",
    "Grid",
    "ModelSpec",
    "energy",
    "mass",
    "pohozaev_P",
    "pohozaev_Q",
]

__version__ = "0.1.0"
