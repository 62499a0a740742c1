"""Spectral Galerkin simulation of damped stochastic wave dynamics on the
torus, with a Monte-Carlo harness that verifies the Gibbs-type invariant
measure, ergodic averaging, and the supporting linear theory."""

from gibbsdyn.spectral import (
    AliasError,
    GridSpec,
    PairField,
    SpectralField,
    dealiased_cube,
    holder_norm,
    project_cube,
    quartic_integral,
    sobolev_pair_norm,
    zero_pair,
)

__version__ = "0.1.0"

__all__ = [
    "AliasError",
    "GridSpec",
    "PairField",
    "SpectralField",
    "dealiased_cube",
    "holder_norm",
    "project_cube",
    "quartic_integral",
    "sobolev_pair_norm",
    "zero_pair",
    "__version__",
]
