"""Fourier-side representation of real fields on the d-torus.

Fields live on [0, 2*pi)^d and are stored by their Fourier coefficients on
the symmetric cube of modes {-K..K}^d with K = floor((M-1)/2), where M is the
number of physical grid points per dimension.  The expansion convention is

    u(x) = sum_n  u_hat(n) * exp(i n.x),

with the Hermitian symmetry u_hat(-n) = conj(u_hat(n)) for real fields, and
the normalized Parseval identity  sum_n |u_hat(n)|^2 = mean_x |u(x)|^2.
All L^2-type norms in this package use that normalized (unit-mass) measure;
`quartic_integral` is the one deliberately physical integral (it carries the
(2*pi)^d volume factor) because it feeds energy diagnostics.

A pair field (u, p) bundles a displacement with its velocity; the fractional
dissipation exponent `s` of the underlying dynamics is part of the grid spec
because every weighted norm on pairs refers to it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy.fft import next_fast_len

TWO_PI = 2.0 * np.pi


class AliasError(ValueError):
    """Raised when a grid is too small for alias-free evaluation."""


@dataclass(frozen=True)
class GridSpec:
    """Discretization parameters: dimension, grid points per axis, dissipation order.

    M physical points per axis carry the modes -K..K with K = (M-1)//2; an
    even M leaves the unused Nyquist row identically zero.
    """

    d: int
    M: int
    s: float

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"d must be 1, 2 or 3, got {self.d}")
        if self.M < 3:
            raise ValueError(f"M must be at least 3, got {self.M}")
        if not self.s > self.d:
            raise ValueError(f"s must exceed d for a normalizable base measure, got s={self.s}, d={self.d}")

    @property
    def K(self) -> int:
        return (self.M - 1) // 2

    @property
    def mode_shape(self) -> tuple[int, ...]:
        return (2 * self.K + 1,) * self.d

    @property
    def n_modes(self) -> int:
        return (2 * self.K + 1) ** self.d


@lru_cache(maxsize=None)
def _lattice(grid: GridSpec):
    """Precomputed mode bookkeeping shared by all operations on a grid."""
    K, d = grid.K, grid.d
    axis = np.arange(-K, K + 1)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    abs2 = np.zeros(grid.mode_shape)
    for m in mesh:
        abs2 += m.astype(float) ** 2
    modes = np.stack([m.ravel() for m in mesh], axis=1)  # (n_modes, d)

    # half lattice: 0 first, then modes whose first nonzero coordinate is
    # positive, in lexicographic order of the integer tuple
    pos = []
    for i, n in enumerate(modes):
        nz = n[n != 0]
        if nz.size and nz[0] > 0:
            pos.append(i)
    pos.sort(key=lambda i: tuple(modes[i]))
    zero_flat = int(np.flatnonzero((modes == 0).all(axis=1))[0])
    half = np.array([zero_flat] + pos)

    # flat index of -n for every mode (reversal of every axis)
    mirror_shaped = np.arange(grid.n_modes).reshape(grid.mode_shape)[(slice(None, None, -1),) * d]
    mirror = mirror_shaped.ravel()

    return {
        "abs2": abs2,
        "modes": modes,
        "half": half,
        "mirror_of_half": mirror[half],
        "mirror": mirror,
        "zero_flat": zero_flat,
    }


def mode_tuples(grid: GridSpec) -> np.ndarray:
    """Integer mode vectors, shape (n_modes, d), C-order of the coefficient array."""
    return _lattice(grid)["modes"]


def half_lattice(grid: GridSpec) -> np.ndarray:
    """Flat indices of the stored half lattice: the zero mode, then one
    representative of each +-n pair (first nonzero coordinate positive),
    lexicographically ordered."""
    return _lattice(grid)["half"]


def mirror_of_half(grid: GridSpec) -> np.ndarray:
    return _lattice(grid)["mirror_of_half"]


def abs2_modes(grid: GridSpec) -> np.ndarray:
    return _lattice(grid)["abs2"]


def omega2(grid: GridSpec) -> np.ndarray:
    """Per-mode stiffness 1 + |n|^s."""
    return 1.0 + abs2_modes(grid) ** (grid.s / 2.0)


def bracket2(grid: GridSpec) -> np.ndarray:
    """Japanese bracket squared, 1 + |n|^2."""
    return 1.0 + abs2_modes(grid)


def flat_index(grid: GridSpec, n: Iterable[int]) -> int:
    """Flat coefficient index of an integer mode vector."""
    n = tuple(int(v) for v in n)
    if len(n) != grid.d:
        raise ValueError(f"mode {n} has wrong dimension for d={grid.d}")
    K = grid.K
    if any(abs(v) > K for v in n):
        raise ValueError(f"mode {n} outside the grid band (K={K})")
    idx = 0
    for v in n:
        idx = idx * (2 * K + 1) + (v + K)
    return idx


@dataclass
class SpectralField:
    """A real scalar field stored by its Fourier coefficients on the mode cube."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != self.grid.mode_shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match grid {self.grid.mode_shape}"
            )

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        c = self.coeffs.ravel()
        return bool(np.max(np.abs(c - np.conj(c[_lattice(self.grid)["mirror"]]))) <= tol)


@dataclass
class PairField:
    """Displacement/velocity pair (u, u_t) on a common grid."""

    u: SpectralField
    p: SpectralField

    def __post_init__(self):
        if self.u.grid != self.p.grid:
            raise ValueError("pair components must share a grid")

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    def copy(self) -> "PairField":
        return PairField(self.u.copy(), self.p.copy())


def zero_field(grid: GridSpec) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.mode_shape, dtype=complex))


def zero_pair(grid: GridSpec) -> PairField:
    return PairField(zero_field(grid), zero_field(grid))


def hermitianize(grid: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    """Project coefficients onto the Hermitian (real-field) subspace."""
    mirror = _lattice(grid)["mirror"]
    flat = coeffs.reshape(coeffs.shape[: coeffs.ndim - grid.d] + (grid.n_modes,))
    sym = 0.5 * (flat + np.conj(flat[..., mirror]))
    return sym.reshape(coeffs.shape)


def scatter_half(grid: GridSpec, half_values: np.ndarray) -> np.ndarray:
    """Build full Hermitian coefficients from values on the half lattice.

    half_values has shape (..., n_half); the zero-mode entry is forced real.
    """
    lat = _lattice(grid)
    half, mirr = lat["half"], lat["mirror_of_half"]
    out = np.zeros(half_values.shape[:-1] + (grid.n_modes,), dtype=complex)
    vals = half_values.astype(complex).copy()
    vals[..., 0] = vals[..., 0].real
    out[..., half] = vals
    out[..., mirr] = np.conj(vals)
    return out.reshape(half_values.shape[:-1] + grid.mode_shape)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def _fft_positions(grid: GridSpec, m: int) -> np.ndarray:
    K = grid.K
    if m < 2 * K + 1:
        raise ValueError(f"evaluation grid m={m} cannot hold the band K={K}")
    return np.arange(-K, K + 1) % m


def _embed_index(grid: GridSpec, m: int) -> tuple[np.ndarray, ...]:
    pos = _fft_positions(grid, m)
    return np.ix_(*([pos] * grid.d))


def coeffs_to_grid(grid: GridSpec, coeffs: np.ndarray, m: int | None = None) -> np.ndarray:
    """Evaluate coefficient arrays (leading batch dims allowed) on an m^d grid."""
    m = grid.M if m is None else int(m)
    lead = coeffs.shape[: coeffs.ndim - grid.d]
    emb = np.zeros(lead + (m,) * grid.d, dtype=complex)
    emb[(Ellipsis,) + _embed_index(grid, m)] = coeffs
    axes = tuple(range(len(lead), len(lead) + grid.d))
    vals = np.fft.ifftn(emb, axes=axes) * float(m) ** grid.d
    return vals.real


def grid_to_coeffs(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    """Fourier coefficients of real grid samples, restricted to the mode cube."""
    lead = values.shape[: values.ndim - grid.d]
    m = values.shape[-1]
    axes = tuple(range(len(lead), len(lead) + grid.d))
    c = np.fft.fftn(values, axes=axes) / float(m) ** grid.d
    return c[(Ellipsis,) + _embed_index(grid, m)]


def to_physical(field: SpectralField, m: int | None = None) -> np.ndarray:
    return coeffs_to_grid(field.grid, field.coeffs, m)


def from_physical(grid: GridSpec, values: np.ndarray) -> SpectralField:
    return SpectralField(grid, grid_to_coeffs(grid, values))


# ---------------------------------------------------------------------------
# projections and products
# ---------------------------------------------------------------------------


def cube_mask(grid: GridSpec, N: int) -> np.ndarray:
    """Boolean mask of modes with max_j |n_j| <= N; empty for N = -1."""
    if N < -1:
        raise ValueError(f"cube size must be >= -1, got {N}")
    if N > grid.K:
        raise ValueError(f"cube size N={N} exceeds the grid band K={grid.K}")
    if N == -1:
        return np.zeros(grid.mode_shape, dtype=bool)
    K = grid.K
    axis = np.abs(np.arange(-K, K + 1)) <= N
    mask = axis
    for _ in range(grid.d - 1):
        mask = np.multiply.outer(mask, axis)
    return mask


def project_cube_coeffs(grid: GridSpec, coeffs: np.ndarray, N: int) -> np.ndarray:
    return coeffs * cube_mask(grid, N)


def project_cube(field: SpectralField, N: int) -> SpectralField:
    """Sharp Fourier truncation to the cube of side 2N+1 (zero field for N=-1)."""
    return SpectralField(field.grid, project_cube_coeffs(field.grid, field.coeffs, N))


def project_cube_pair(v: PairField, N: int) -> PairField:
    return PairField(project_cube(v.u, N), project_cube(v.p, N))


def dealiased_cube_coeffs(grid: GridSpec, coeffs: np.ndarray, N: int) -> np.ndarray:
    if N == -1:
        return np.zeros_like(coeffs)
    if grid.M < 4 * N + 2:
        raise AliasError(
            f"grid M={grid.M} too small for alias-free cubing at N={N} (need M >= {4 * N + 2})"
        )
    trunc = project_cube_coeffs(grid, coeffs, N)
    vals = coeffs_to_grid(grid, trunc)
    return project_cube_coeffs(grid, grid_to_coeffs(grid, vals**3), N)


def dealiased_cube(field: SpectralField, N: int) -> SpectralField:
    """Cube-truncated pointwise third power, evaluated alias-free.

    Products are formed on the physical grid; M >= 4N+2 guarantees that the
    wrapped images of modes up to 3N cannot land back inside the retained
    cube, so the result equals the exact triple convolution on |n|_inf <= N.
    """
    return SpectralField(field.grid, dealiased_cube_coeffs(field.grid, field.coeffs, N))


# ---------------------------------------------------------------------------
# norms and integrals
# ---------------------------------------------------------------------------


def l2_norm_sq(field: SpectralField) -> float:
    return float(np.sum(np.abs(field.coeffs) ** 2))


def inner(f: SpectralField, g: SpectralField) -> float:
    return float(np.sum(f.coeffs * np.conj(g.coeffs)).real)


def pair_inner(v: PairField, w: PairField) -> float:
    return inner(v.u, w.u) + inner(v.p, w.p)


def sobolev_pair_norm(v: PairField, alpha: float) -> float:
    """Pair Sobolev norm: <n>^alpha on u and <n>^(alpha - s/2) on the velocity."""
    grid = v.grid
    br2 = bracket2(grid)
    wu = br2**alpha
    wp = br2 ** (alpha - grid.s / 2.0)
    val = np.sum(wu * np.abs(v.u.coeffs) ** 2) + np.sum(wp * np.abs(v.p.coeffs) ** 2)
    return float(np.sqrt(val))


def sobolev_norm(field: SpectralField, alpha: float) -> float:
    br2 = bracket2(field.grid)
    return float(np.sqrt(np.sum(br2**alpha * np.abs(field.coeffs) ** 2)))


def holder_norm_field(field: SpectralField, beta: float, oversample: int = 2) -> float:
    """Sup norm of (1 - Laplacian)^(beta/2) applied to the field.

    The sup is taken on an oversampled grid (default twice the carrier band),
    so the value is a lower bound of the true supremum that is exact in the
    band-limited limit of dense sampling.
    """
    grid = field.grid
    weighted = field.coeffs * bracket2(grid) ** (beta / 2.0)
    m = next_fast_len(oversample * (2 * grid.K + 1))
    vals = coeffs_to_grid(grid, weighted, m)
    return float(np.max(np.abs(vals)))


def holder_norm(v: PairField, beta: float, oversample: int = 2) -> float:
    """Pair Hoelder-type norm: max of the component sup norms at weights
    (beta, beta - s/2)."""
    return max(
        holder_norm_field(v.u, beta, oversample),
        holder_norm_field(v.p, beta - v.grid.s / 2.0, oversample),
    )


def occupied_band(grid: GridSpec, coeffs: np.ndarray) -> int:
    """Largest max_j |n_j| carrying a nonzero coefficient (over any batch)."""
    flat = np.abs(coeffs.reshape((-1, grid.n_modes))).max(axis=0)
    nz = flat > 0.0
    if not nz.any():
        return 0
    return int(np.abs(mode_tuples(grid)[nz]).max())


def quartic_integral_coeffs(grid: GridSpec, coeffs: np.ndarray, band: int | None = None) -> np.ndarray:
    """Physical-space integral of u^4 over [0, 2*pi)^d for batched coefficients.

    Evaluated on a grid of at least 4*band+2 points per axis so the quartic's
    mean is quadrature-exact for the occupied band.
    """
    if band is None:
        band = occupied_band(grid, coeffs)
    m = next_fast_len(max(4 * band + 2, 2 * grid.K + 1))
    vals = coeffs_to_grid(grid, coeffs, m)
    axes = tuple(range(vals.ndim - grid.d, vals.ndim))
    return np.mean(vals**4, axis=axes) * TWO_PI**grid.d


def quartic_integral(field: SpectralField, band: int | None = None) -> float:
    """Integral of u(x)^4 dx over the torus (volume factor (2*pi)^d included)."""
    return float(quartic_integral_coeffs(field.grid, field.coeffs, band))
