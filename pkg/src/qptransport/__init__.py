"""Spectral quantities and ballistic transport for one-frequency
quasi-periodic Schrodinger operators: continued-fraction scales, analytic
torus functions, cocycle spectral data, KAM reducibility, wavepacket
evolution and the modified spectral transform."""

from . import (
    cocycle,
    errors,
    evolve,
    kam,
    numberfield,
    spectral_transform,
    torusfun,
)

__version__ = "0.1.0"

__all__ = [
    "cocycle",
    "errors",
    "evolve",
    "kam",
    "numberfield",
    "spectral_transform",
    "torusfun",
    "__version__",
]
