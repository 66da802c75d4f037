"""Reproducible random band-limited fields for sweeps and tests.

All samplers draw unit complex Gaussians per retained mode, Hermitian-
symmetrize so the physical field is real, and zero the mean and Nyquist
modes.  A trial index is mixed into the seed, so a sweep is reproducible
from (seed, trial) alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bands import get_bands
from .spectral import Grid, SpectralField, leray_project


def hermitian_noise(grid: Grid, rng: np.random.Generator) -> np.ndarray:
    """Complex Gaussian coefficients with exact Hermitian symmetry."""
    z = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    z_flip = np.roll(z[::-1, ::-1, ::-1], 1, axis=(0, 1, 2))
    c = 0.5 * (z + np.conj(z_flip))
    c[0, 0, 0] = 0.0
    c[grid.nyquist_mask] = 0.0
    return c


def ring_mask(grid: Grid, beta, direction: str, k: int) -> np.ndarray:
    """Modes whose symbol lies in the dyadic ring [3/4, 8/3] * 2^k."""
    bands = get_bands(grid, np.asarray(beta, dtype=np.float64))
    r = bands.r_perp if direction == "perp" else bands.r_par
    return (r >= 0.75 * 2.0**k) & (r <= (8.0 / 3.0) * 2.0**k)


def ball_mask(grid: Grid, beta, direction: str, k: int) -> np.ndarray:
    """Modes whose symbol lies in the ball of radius 4/3 * 2^k."""
    bands = get_bands(grid, np.asarray(beta, dtype=np.float64))
    r = bands.r_perp if direction == "perp" else bands.r_par
    return r <= (4.0 / 3.0) * 2.0**k

def plateau_mask(grid: Grid, beta, direction: str, k: int) -> np.ndarray:
    """Modes inside [4/3, 19/12] * 2^k, where exactly one shell responds."""
    bands = get_bands(grid, np.asarray(beta, dtype=np.float64))
    r = bands.r_perp if direction == "perp" else bands.r_par
    return (r >= (4.0 / 3.0) * 2.0**k) & (r <= (19.0 / 12.0) * 2.0**k)


@dataclass
class FieldSampler:
    """Band-occupancy-constrained Gaussian field sampler.

    ``k_range``/``l_range`` restrict the perpendicular/parallel symbol to the
    union of shell supports [3/4 * 2^kmin, 8/3 * 2^kmax].  Degenerate modes
    (vanishing symbol) can be excluded per direction.  ``extra_mask`` is
    ANDed on top for bespoke supports.
    """

    grid: Grid
    seed: int
    beta: np.ndarray | None = None
    k_range: tuple[int, int] | None = None
    l_range: tuple[int, int] | None = None
    exclude_degenerate: tuple[str, ...] = ()
    within_dealias: bool = True
    extra_mask: np.ndarray | None = None
    _mask: np.ndarray = field(init=False, repr=False, default=None)

    def mask(self) -> np.ndarray:
        if self._mask is not None:
            return self._mask
        g = self.grid
        m = np.ones(g.shape, dtype=bool)
        if self.within_dealias:
            m &= g.dealias_mask
        if self.beta is not None:
            bands = get_bands(g, np.asarray(self.beta, dtype=np.float64))
            if self.k_range is not None:
                kmin, kmax = self.k_range
                m &= (bands.r_perp >= 0.75 * 2.0**kmin) & (
                    bands.r_perp <= (8.0 / 3.0) * 2.0**kmax
                )
            if self.l_range is not None:
                lmin, lmax = self.l_range
                m &= (bands.r_par >= 0.75 * 2.0**lmin) & (
                    bands.r_par <= (8.0 / 3.0) * 2.0**lmax
                )
            for direction in self.exclude_degenerate:
                dw = bands.weights(direction)
                m &= ~dw.degenerate
        if self.extra_mask is not None:
            m = m & self.extra_mask
        m = m.copy()
        m[0, 0, 0] = False
        m[g.nyquist_mask] = False
        self._mask = m
        return m

    def _rng(self, trial: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, trial])

    def scalar(self, trial: int = 0) -> SpectralField:
        c = hermitian_noise(self.grid, self._rng(trial)) * self.mask()
        return SpectralField(self.grid, c)

    def vector(self, trial: int = 0, divergence_free: bool = False) -> SpectralField:
        rng = self._rng(trial)
        m = self.mask()
        c = np.stack([hermitian_noise(self.grid, rng) * m for _ in range(3)])
        u = SpectralField(self.grid, c)
        if divergence_free:
            u = leray_project(u)
        return u


def random_smooth_field(
    grid: Grid,
    seed: int,
    k_cap: float | None = None,
    decay: float | None = None,
    vector: bool = False,
    divergence_free: bool = False,
    trial: int = 0,
) -> SpectralField:
    """Isotropically band-limited field with a Gaussian spectral envelope.

    ``k_cap`` defaults to the dealias radius / 2 so quadratic products stay
    exactly representable.
    """
    if k_cap is None:
        k_cap = grid.dealias_fraction * grid.n_per_axis / 4.0
    if decay is None:
        decay = k_cap / 2.0
    rng = np.random.default_rng([seed, trial])
    kk = np.sqrt(grid.k_sq)
    envelope = np.exp(-0.5 * (kk / decay) ** 2) * (kk <= k_cap) * (kk > 0)
    if vector:
        c = np.stack([hermitian_noise(grid, rng) * envelope for _ in range(3)])
        u = SpectralField(grid, c)
        if divergence_free:
            u = leray_project(u)
        return u
    return SpectralField(grid, hermitian_noise(grid, rng) * envelope)
