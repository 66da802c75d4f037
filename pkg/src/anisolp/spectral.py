"""Periodic-torus spectral substrate: grids, fields, multiplier operators, norms.

Conventions used by every other module:

* the domain is the torus [0, 2*pi)^3, wavenumbers are the integers in
  [-n/2, n/2) per axis;
* the forward transform divides by n^3, so ``coeffs[xi]`` is the true Fourier
  coefficient of ``exp(i xi . x)``;
* Parseval carries the volume factor explicitly:
  ||f||_{L2}^2 = (2*pi)^3 * sum |coeffs|^2;
* Nyquist modes (-n/2) are zeroed on construction and after every nonlinear
  product, and quadratic products are dealiased by the 2/3 rule.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InvalidDirectionError,
    InvalidGridError,
    MeanViolationError,
)

VOLUME = (2.0 * np.pi) ** 3

#: relative tolerance used by the mean-zero check
MEAN_TOL = 1e-13

_ALP1_MAGIC = b"ALP1"


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class Grid:
    """Cubic periodic grid with precomputed wavenumber arrays.

    ``n_per_axis`` modes per axis; integer wavenumbers in [-n/2, n/2).
    The dealias mask retains exactly the modes with every
    ``|xi_i| <= dealias_fraction * n/2``.
    """

    n_per_axis: int
    domain_length: float = 2.0 * np.pi
    dealias_fraction: float = 2.0 / 3.0

    # filled in __post_init__
    k1: np.ndarray = field(init=False, repr=False)
    kx: np.ndarray = field(init=False, repr=False)
    ky: np.ndarray = field(init=False, repr=False)
    kz: np.ndarray = field(init=False, repr=False)
    k_sq: np.ndarray = field(init=False, repr=False)
    dealias_mask: np.ndarray = field(init=False, repr=False)
    nyquist_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        n = self.n_per_axis
        if n < 8 or n % 2 != 0:
            raise InvalidGridError(f"grid size must be an even integer >= 8, got {n}")
        if not (0.0 < self.dealias_fraction <= 1.0):
            raise InvalidGridError(
                f"dealias fraction must lie in (0, 1], got {self.dealias_fraction}"
            )
        k1 = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)  # [0..n/2-1, -n/2..-1]
        kx, ky, kz = np.meshgrid(k1, k1, k1, indexing="ij")
        object.__setattr__(self, "k1", k1)
        object.__setattr__(self, "kx", kx)
        object.__setattr__(self, "ky", ky)
        object.__setattr__(self, "kz", kz)
        object.__setattr__(self, "k_sq", (kx**2 + ky**2 + kz**2).astype(np.float64))
        kcut = self.dealias_fraction * n / 2.0
        object.__setattr__(
            self,
            "dealias_mask",
            (np.abs(kx) <= kcut) & (np.abs(ky) <= kcut) & (np.abs(kz) <= kcut),
        )
        nyq = -n // 2
        object.__setattr__(
            self, "nyquist_mask", (kx == nyq) | (ky == nyq) | (kz == nyq)
        )

    @property
    def shape(self) -> tuple[int, int, int]:
        n = self.n_per_axis
        return (n, n, n)

    @property
    def n_modes(self) -> int:
        return self.n_per_axis**3

    @property
    def dx(self) -> float:
        return self.domain_length / self.n_per_axis

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Physical-space coordinate arrays (x1, x2, x3), 'ij' indexed."""
        x = np.arange(self.n_per_axis) * self.dx
        return np.meshgrid(x, x, x, indexing="ij")

    def wavevector_dot(self, e: np.ndarray) -> np.ndarray:
        """xi . e as a float array over the grid."""
        return self.kx * e[0] + self.ky * e[1] + self.kz * e[2]

    def wavevector_cross_sq(self, e: np.ndarray) -> np.ndarray:
        """|xi x e|^2 computed componentwise (no cancellation for lattice xi)."""
        cx = self.ky * e[2] - self.kz * e[1]
        cy = self.kz * e[0] - self.kx * e[2]
        cz = self.kx * e[1] - self.ky * e[0]
        return cx**2 + cy**2 + cz**2


def make_grid(n: int, strict: bool = True) -> Grid:
    """Build the standard grid.

    ``strict`` enforces the documented contract (n a power of two, n >= 8).
    ``strict=False`` additionally admits any even n >= 8; used by grid
    refinement studies (e.g. 32 -> 48) where powers of two are too sparse.
    """
    if strict and not _is_power_of_two(n):
        raise InvalidGridError(f"grid size must be a power of two, got {n}")
    return Grid(n_per_axis=int(n))


@dataclass(eq=False)
class SpectralField:
    """Scalar or 3-vector field stored as truncated Fourier coefficients.

    ``coeffs`` has shape (n,n,n) for rank 'scalar' and (3,n,n,n) for
    rank 'vector3'.  Hermitian symmetry (real physical field) is maintained
    by all toolkit operations but never silently enforced.
    """

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        shape = self.grid.shape
        if self.coeffs.shape not in (shape, (3, *shape)):
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match grid {shape}"
            )
        if self.coeffs.dtype != np.complex128:
            self.coeffs = self.coeffs.astype(np.complex128)

    @property
    def rank(self) -> str:
        return "scalar" if self.coeffs.ndim == 3 else "vector3"

    @property
    def is_vector(self) -> bool:
        return self.coeffs.ndim == 4

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def component(self, i: int) -> "SpectralField":
        if not self.is_vector:
            raise ValueError("component() requires a vector field")
        return SpectralField(self.grid, self.coeffs[i].copy())

    def mean_coeff(self) -> np.ndarray:
        return self.coeffs[..., 0, 0, 0]

    @property
    def is_mean_zero(self) -> bool:
        scale = np.abs(self.coeffs).max()
        tol = MEAN_TOL * max(1.0, scale)
        return bool(np.all(np.abs(self.mean_coeff()) <= tol))

    def require_mean_zero(self, what: str = "operation") -> None:
        if not self.is_mean_zero:
            raise MeanViolationError(f"{what} requires a mean-zero field")

    def with_zero_mean(self) -> "SpectralField":
        out = self.coeffs.copy()
        out[..., 0, 0, 0] = 0.0
        return SpectralField(self.grid, out)

    # small arithmetic surface; results share no storage with operands
    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * c)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def apply_multiplier(self, m: np.ndarray) -> "SpectralField":
        """Apply a Fourier multiplier (scalar array broadcast over components)."""
        return SpectralField(self.grid, self.coeffs * m)

    def dot_constant(self, e: np.ndarray) -> "SpectralField":
        """u . e for a constant vector e (vector -> scalar)."""
        if not self.is_vector:
            raise ValueError("dot_constant() requires a vector field")
        return SpectralField(
            self.grid,
            e[0] * self.coeffs[0] + e[1] * self.coeffs[1] + e[2] * self.coeffs[2],
        )


def zeros_like(grid: Grid, rank: str = "scalar") -> SpectralField:
    shape = grid.shape if rank == "scalar" else (3, *grid.shape)
    return SpectralField(grid, np.zeros(shape, dtype=np.complex128))


def from_physical(grid: Grid, values: np.ndarray) -> SpectralField:
    """Forward transform; divides by n^3 and zeroes Nyquist modes."""
    values = np.asarray(values)
    if values.shape == grid.shape:
        coeffs = np.fft.fftn(values) / grid.n_modes
    elif values.shape == (3, *grid.shape):
        coeffs = np.fft.fftn(values, axes=(1, 2, 3)) / grid.n_modes
    else:
        raise ValueError(f"physical array shape {values.shape} does not match grid")
    coeffs[..., grid.nyquist_mask] = 0.0
    return SpectralField(grid, coeffs)


def to_physical(f: SpectralField) -> np.ndarray:
    """Inverse transform to a real physical-space array."""
    axes = (1, 2, 3) if f.is_vector else None
    if axes is None:
        out = np.fft.ifftn(f.coeffs * f.grid.n_modes)
    else:
        out = np.fft.ifftn(f.coeffs * f.grid.n_modes, axes=axes)
    return np.real(out)


forward_transform = from_physical
inverse_transform = to_physical


def dealias(f: SpectralField) -> SpectralField:
    """Apply the 2/3-rule mask and zero Nyquist modes."""
    out = f.coeffs * f.grid.dealias_mask
    out[..., f.grid.nyquist_mask] = 0.0
    return SpectralField(f.grid, out)


def multiply(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product computed in physical space, then dealiased."""
    if f.grid is not g.grid and f.grid.shape != g.grid.shape:
        raise ValueError("operands live on different grids")
    prod = to_physical(f) * to_physical(g)
    return dealias(from_physical(f.grid, prod))


def directional_derivative(f: SpectralField, e: np.ndarray) -> SpectralField:
    """beta.grad f: multiplier i*(xi . e) for a unit vector e."""
    e = np.asarray(e, dtype=np.float64)
    if abs(np.linalg.norm(e) - 1.0) > 1e-12:
        raise InvalidDirectionError(f"direction must be unit length, |e|={np.linalg.norm(e)!r}")
    return f.apply_multiplier(1j * f.grid.wavevector_dot(e))


def gradient(f: SpectralField) -> SpectralField:
    """grad of a scalar field (scalar -> vector)."""
    if f.is_vector:
        raise ValueError("gradient() expects a scalar field")
    g = f.grid
    out = np.empty((3, *g.shape), dtype=np.complex128)
    out[0] = 1j * g.kx * f.coeffs
    out[1] = 1j * g.ky * f.coeffs
    out[2] = 1j * g.kz * f.coeffs
    return SpectralField(g, out)


def divergence(u: SpectralField) -> SpectralField:
    if not u.is_vector:
        raise ValueError("divergence() expects a vector field")
    g = u.grid
    out = 1j * (g.kx * u.coeffs[0] + g.ky * u.coeffs[1] + g.kz * u.coeffs[2])
    return SpectralField(g, out)


def curl(u: SpectralField) -> SpectralField:
    if not u.is_vector:
        raise ValueError("curl() expects a vector field")
    g = u.grid
    out = np.empty_like(u.coeffs)
    out[0] = 1j * (g.ky * u.coeffs[2] - g.kz * u.coeffs[1])
    out[1] = 1j * (g.kz * u.coeffs[0] - g.kx * u.coeffs[2])
    out[2] = 1j * (g.kx * u.coeffs[1] - g.ky * u.coeffs[0])
    return SpectralField(g, out)


def laplacian(f: SpectralField) -> SpectralField:
    return f.apply_multiplier(-f.grid.k_sq)


def inv_laplacian(f: SpectralField) -> SpectralField:
    """Inverse Laplacian, multiplier -1/|xi|^2 with coeff(0) pinned to zero."""
    f.require_mean_zero("inv_laplacian")
    g = f.grid
    ksq = g.k_sq.copy()
    ksq[0, 0, 0] = 1.0
    out = f.coeffs * (-1.0 / ksq)
    out[..., 0, 0, 0] = 0.0
    return SpectralField(g, out)


def leray_project(u: SpectralField) -> SpectralField:
    """L2-orthogonal projection onto divergence-free fields: Id - xi xi^T/|xi|^2."""
    if not u.is_vector:
        raise ValueError("leray_project() expects a vector field")
    u.require_mean_zero("leray_project")
    g = u.grid
    ksq = g.k_sq.copy()
    ksq[0, 0, 0] = 1.0
    xi_dot_u = g.kx * u.coeffs[0] + g.ky * u.coeffs[1] + g.kz * u.coeffs[2]
    factor = xi_dot_u / ksq
    out = np.empty_like(u.coeffs)
    out[0] = u.coeffs[0] - g.kx * factor
    out[1] = u.coeffs[1] - g.ky * factor
    out[2] = u.coeffs[2] - g.kz * factor
    out[..., 0, 0, 0] = 0.0
    return SpectralField(g, out)


def l2_norm(f: SpectralField) -> float:
    """Physical L2 norm via Parseval (vector fields: Euclidean over components)."""
    return float(np.sqrt(VOLUME * np.sum(np.abs(f.coeffs) ** 2)))


def l2_inner(f: SpectralField, g: SpectralField) -> float:
    """L2 inner product of two real fields."""
    return float(VOLUME * np.real(np.sum(f.coeffs * np.conj(g.coeffs))))


def sobolev_norm(f: SpectralField, s: float) -> float:
    """Homogeneous Sobolev norm: (sum |xi|^{2s} |coeffs|^2 * (2 pi)^3)^(1/2)."""
    if s < 0:
        f.require_mean_zero("sobolev_norm with s < 0")
    ksq = f.grid.k_sq
    if s == 0:
        w = np.ones_like(ksq)
    else:
        kpos = ksq.copy()
        kpos[0, 0, 0] = 1.0  # mean mode carries no weight for s != 0
        w = kpos**s
        w[0, 0, 0] = 0.0
    mag2 = np.abs(f.coeffs) ** 2
    if f.is_vector:
        mag2 = mag2.sum(axis=0)
    return float(np.sqrt(VOLUME * np.sum(w * mag2)))


def energy(u: SpectralField) -> float:
    """Kinetic energy ||u||_{L2}^2 (no 1/2 factor)."""
    return l2_norm(u) ** 2


def write_field(f: SpectralField, path) -> None:
    """Write the ALP1 binary snapshot format.

    Layout: magic "ALP1", three uint32 little-endian dims, one uint8 rank tag
    (0=scalar, 1=vector3), then the complex coefficients as interleaved
    little-endian float64 in row-major xi order, vector components outermost.
    """
    n = f.grid.n_per_axis
    rank_tag = 1 if f.is_vector else 0
    with open(path, "wb") as fh:
        fh.write(_ALP1_MAGIC)
        fh.write(struct.pack("<IIIB", n, n, n, rank_tag))
        fh.write(np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes())


def read_field(path, grid: Grid | None = None) -> SpectralField:
    """Read an ALP1 snapshot; builds a (non-strict) grid unless one is given."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _ALP1_MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {_ALP1_MAGIC!r}")
        n1, n2, n3, rank_tag = struct.unpack("<IIIB", fh.read(13))
        if not (n1 == n2 == n3):
            raise ValueError(f"only cubic snapshots supported, got {(n1, n2, n3)}")
        if rank_tag not in (0, 1):
            raise ValueError(f"unknown rank tag {rank_tag}")
        shape = (n1, n1, n1) if rank_tag == 0 else (3, n1, n1, n1)
        count = int(np.prod(shape))
        data = np.frombuffer(fh.read(count * 16), dtype="<c16", count=count)
    if grid is None:
        grid = make_grid(int(n1), strict=False)
    elif grid.n_per_axis != n1:
        raise ValueError(f"snapshot size {n1} does not match grid {grid.n_per_axis}")
    return SpectralField(grid, data.reshape(shape).astype(np.complex128))
