import numpy as np
import pytest

from gibbsdyn.spectral import GridSpec, PairField, SpectralField, hermitianize


def random_hermitian_coeffs(grid: GridSpec, rng, decay: float = 1.0) -> np.ndarray:
    """Random real-field coefficients with a mild spectral decay."""
    raw = rng.standard_normal(grid.mode_shape) + 1j * rng.standard_normal(grid.mode_shape)
    from gibbsdyn.spectral import bracket2

    raw = raw / bracket2(grid) ** (decay / 2.0)
    return hermitianize(grid, raw)


def random_field(grid: GridSpec, rng, decay: float = 1.0) -> SpectralField:
    return SpectralField(grid, random_hermitian_coeffs(grid, rng, decay))


def random_pair(grid: GridSpec, rng, decay: float = 1.0) -> PairField:
    return PairField(random_field(grid, rng, decay), random_field(grid, rng, decay))


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)
