"""Numerics for the twisted Laplacian on C^n: grids, Laguerre spectral calculus,
twisted convolution, heat/Schrödinger/wave propagators, subordination kernels,
Hardy-space atoms and maximal functions, plus an experiment harness."""

from .grid import Cube, Grid, GridFunction, apply_twisted_laplacian, make_grid, twisted_translate
from .laguerre import LaguerreBasis, build_basis, phi_k
from .twisted_conv import multiplier_kernel, twisted_conv
from .propagators import MultiplierSpec, heat_apply, schrodinger_apply, wave_apply

__all__ = [
    "Cube", "Grid", "GridFunction", "LaguerreBasis", "MultiplierSpec",
    "apply_twisted_laplacian", "build_basis", "heat_apply", "make_grid", "multiplier_kernel",
    "phi_k", "schrodinger_apply", "twisted_conv", "twisted_translate", "wave_apply",
]

__version__ = "0.1.0"
