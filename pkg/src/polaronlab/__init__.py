"""Truncated Fock-space laboratory for the Bogoliubov-Froehlich polaron at fixed total momentum."""

__version__ = "0.1.0"

from .grid import CARTESIAN, SPHERICAL_M0, Grid, GridSpec, ResourceError, build_grid, min_mode_norm
from .model import INFINITE_CUTOFF, ModelError, ModelParams, dispersion, form_factor, theta11, theta22
from .fock import FockBasis, SparseHamiltonian, annihilation_amplitudes, assemble, enumerate_basis, matvec
from .solver import GroundStateResult, dense_ground_oracle, lanczos_ground

__all__ = [
    "CARTESIAN",
    "SPHERICAL_M0",
    "INFINITE_CUTOFF",
    "FockBasis",
    "Grid",
    "GridSpec",
    "GroundStateResult",
    "ModelError",
    "ModelParams",
    "ResourceError",
    "SparseHamiltonian",
    "annihilation_amplitudes",
    "assemble",
    "build_grid",
    "dense_ground_oracle",
    "dispersion",
    "enumerate_basis",
    "form_factor",
    "lanczos_ground",
    "matvec",
    "min_mode_norm",
    "theta11",
    "theta22",
]
