"""Direction-adapted dyadic analysis: cutoffs, band projectors, norms, paraproducts.

The dyadic cutoffs are built once and shared: chi is a smoothed step equal to
1 on [0, 19/24] and 0 on [4/3, inf), phi(r) = chi(r/2) - chi(r).  By
construction Supp phi is contained in {3/4 <= r <= 8/3} and both partition
identities hold exactly (telescoping):

    sum_j phi(2^-j r) = 1           for r > 0,
    chi(r) + sum_{j>=0} phi(2^-j r) = 1   for r >= 0.

Band projectors filter on |xi x beta| (perpendicular shells, index k) or
|xi . beta| (parallel shells, index l).  Lattice modes with an exactly
vanishing symbol are invisible to the corresponding decomposition; norms
report the L2 mass carried by such modes instead of silently dropping it.
"""

from __future__ import annotations

import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import (
    DegenerateNormError,
    EmptyBandWarning,
    TruncationWarning,
    UnsupportedCombinationError,
)
from .spectral import (
    VOLUME,
    Grid,
    SpectralField,
    dealias,
    multiply,
    to_physical,
)

CHI_ONE_END = 19.0 / 24.0  # chi == 1 below this radius
CHI_ZERO_START = 4.0 / 3.0  # chi == 0 above this radius

# symbols below sqrt(tol)*|xi| are snapped to exact zero; the threshold only
# needs to absorb roundoff of xi . beta (~|xi| * 1e-16), genuinely tiny
# lattice symbols must stay nonzero
_DEGENERATE_REL_TOL = 1e-24


def _bump(x: np.ndarray) -> np.ndarray:
    """The standard C-infinity bump exp(-1/x) for x > 0, else 0."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


@dataclass(frozen=True)
class Cutoffs:
    """Closed-form smooth cutoff pair (chi, phi)."""

    one_end: float = CHI_ONE_END
    zero_start: float = CHI_ZERO_START

    def chi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        s = (r - self.one_end) / (self.zero_start - self.one_end)
        up = _bump(1.0 - s)
        return up / (_bump(s) + up)

    def phi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        return self.chi(r / 2.0) - self.chi(r)

    def tabulate(self, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(chi(r), phi(r)) on a caller-supplied mesh."""
        return self.chi(r), self.phi(r)

    def validate(self, n_points: int = 100_000, tol: float = 1e-12) -> None:
        """Check supports and both partition identities on a log-spaced mesh."""
        r = np.logspace(-3, 3, n_points)
        js = np.arange(-14, 15)
        total = np.zeros_like(r)
        for j in js:
            total += self.phi(r * 2.0 ** (-float(j)))
        if np.max(np.abs(total - 1.0)) > tol:
            raise AssertionError("homogeneous partition of unity violated")
        r2 = np.concatenate([[0.0], np.logspace(-3, 3, n_points)])
        total2 = self.chi(r2)
        for j in range(0, 15):
            total2 += self.phi(r2 * 2.0 ** (-float(j)))
        if np.max(np.abs(total2 - 1.0)) > tol:
            raise AssertionError("inhomogeneous partition of unity violated")
        bad_phi = self.phi(np.concatenate([np.linspace(0, 0.75, 2000), np.linspace(8 / 3, 10, 2000)]))
        if np.max(np.abs(bad_phi)) > 0:
            raise AssertionError("phi support exceeds [3/4, 8/3]")
        if np.max(np.abs(self.chi(np.linspace(4 / 3, 10, 2000)))) > 0:
            raise AssertionError("chi support exceeds [0, 4/3]")


def make_cutoffs(validate: bool = False) -> Cutoffs:
    c = Cutoffs()
    if validate:
        c.validate()
    return c


CUTOFFS = make_cutoffs()


@dataclass
class BandIndex:
    """One dyadic cell: perpendicular shell k, parallel shell l.

    Either entry may be the string "lowpass" selecting the chi-filtered
    operator instead of the phi band.
    """

    k: int | Literal["lowpass"]
    l: int | Literal["lowpass"]


@dataclass
class NormResult:
    """Norm value plus the L2 mass excluded on degenerate-symbol modes."""

    value: float
    excluded_mass: float = 0.0
    n_excluded: int = 0

    def __float__(self) -> float:
        return self.value


@dataclass
class DirectionWeights:
    """Sparse per-mode band weights for one direction.

    Every mode with symbol r > 0 responds to at most two adjacent shells;
    weights are stored for the three candidates floor(log2 r) + {-1, 0, +1}.
    """

    r: np.ndarray  # symbol magnitude per mode
    base: np.ndarray  # floor(log2 r) per mode (0 on degenerate modes)
    w: np.ndarray  # (3, n,n,n) phi values at base-1, base, base+1
    degenerate: np.ndarray  # r == 0 mask
    k_min: int
    k_max: int

    def shell_indices(self) -> range:
        return range(self.k_min, self.k_max + 1)


def _direction_weights(r: np.ndarray, cutoffs: Cutoffs) -> DirectionWeights:
    degenerate = r == 0.0
    rpos = np.where(degenerate, 1.0, r)
    base = np.floor(np.log2(rpos)).astype(np.int64)
    base[degenerate] = 0
    w = np.empty((3, *r.shape))
    for i, off in enumerate((-1, 0, 1)):
        w[i] = cutoffs.phi(r * np.exp2(-(base + off).astype(np.float64)))
        w[i][degenerate] = 0.0
    if np.all(degenerate):
        k_min = k_max = 0
    else:
        k_min = int(base[~degenerate].min()) - 1
        k_max = int(base[~degenerate].max()) + 1
    return DirectionWeights(
        r=r, base=base, w=w, degenerate=degenerate, k_min=k_min, k_max=k_max
    )


class DyadicBands:
    """Per-(grid, beta) band structure shared by norms and projectors."""

    def __init__(self, grid: Grid, beta: np.ndarray, cutoffs: Cutoffs = CUTOFFS):
        beta = np.asarray(beta, dtype=np.float64)
        self.grid = grid
        self.beta = beta
        self.cutoffs = cutoffs
        dot = grid.wavevector_dot(beta)
        cross_sq = grid.wavevector_cross_sq(beta)
        # snap roundoff-level symbols to exact zero so degeneracy is stable
        scale = np.maximum(grid.k_sq, 1.0)
        r_par = np.abs(dot)
        r_par[r_par**2 <= _DEGENERATE_REL_TOL * scale] = 0.0
        r_perp_sq = np.where(cross_sq <= _DEGENERATE_REL_TOL * scale, 0.0, cross_sq)
        self.r_par = r_par
        self.r_perp = np.sqrt(r_perp_sq)
        self.perp = _direction_weights(self.r_perp, cutoffs)
        self.par = _direction_weights(self.r_par, cutoffs)

    def weights(self, direction: str) -> DirectionWeights:
        if direction == "perp":
            return self.perp
        if direction == "par":
            return self.par
        raise ValueError(f"direction must be 'perp' or 'par', got {direction!r}")

    def band_multiplier(self, direction: str, k: int, lowpass: bool = False) -> np.ndarray:
        r = self.r_perp if direction == "perp" else self.r_par
        arg = r * 2.0 ** (-float(k))
        return self.cutoffs.chi(arg) if lowpass else self.cutoffs.phi(arg)

    def band_l2_sq_matrix(self, f: SpectralField) -> tuple[np.ndarray, range, range]:
        """Matrix M[k, l] = ||Delta_k^perp Delta_l^par f||_{L2}^2 plus index ranges."""
        ks = self.perp.shell_indices()
        ls = self.par.shell_indices()
        mag2 = np.abs(f.coeffs) ** 2
        if f.is_vector:
            mag2 = mag2.sum(axis=0)
        n_k, n_l = len(ks), len(ls)
        m = np.zeros(n_k * n_l)
        kidx_all = (self.perp.base - self.perp.k_min).ravel()
        lidx_all = (self.par.base - self.par.k_min).ravel()
        mag2 = mag2.ravel()
        for i in range(3):
            wi = (self.perp.w[i] ** 2).ravel()
            if not wi.any():
                continue
            for j in range(3):
                wj = (self.par.w[j] ** 2).ravel()
                contrib = wi * wj * mag2
                if not contrib.any():
                    continue
                flat = (kidx_all + (i - 1)) * n_l + (lidx_all + (j - 1))
                # zero-weight entries (degenerate modes) may carry an
                # out-of-range index; park them in cell 0
                flat = np.where(contrib > 0, flat, 0)
                m += np.bincount(flat, weights=contrib, minlength=n_k * n_l)
        return VOLUME * m.reshape(n_k, n_l), ks, ls

    def degenerate_mass(self, f: SpectralField, direction: str | None = None) -> tuple[float, int]:
        """L2 mass (and mode count) on modes invisible to the decomposition."""
        if direction == "perp":
            mask = self.perp.degenerate
        elif direction == "par":
            mask = self.par.degenerate
        else:
            mask = self.perp.degenerate | self.par.degenerate
        mag2 = np.abs(f.coeffs) ** 2
        if f.is_vector:
            mag2 = mag2.sum(axis=0)
        carried = mask & (mag2 > 0)
        return float(VOLUME * mag2[mask].sum()), int(np.count_nonzero(carried))


_BANDS_CACHE: OrderedDict[tuple, DyadicBands] = OrderedDict()
_BANDS_CACHE_SIZE = 4


def get_bands(grid: Grid, beta: np.ndarray, cutoffs: Cutoffs = CUTOFFS) -> DyadicBands:
    """Small LRU over (grid size, beta) so repeated norms reuse the weights."""
    beta = np.asarray(beta, dtype=np.float64)
    key = (grid.n_per_axis, grid.dealias_fraction, beta.tobytes(), id(cutoffs))
    hit = _BANDS_CACHE.get(key)
    if hit is not None:
        _BANDS_CACHE.move_to_end(key)
        return hit
    bands = DyadicBands(grid, beta, cutoffs)
    _BANDS_CACHE[key] = bands
    while len(_BANDS_CACHE) > _BANDS_CACHE_SIZE:
        _BANDS_CACHE.popitem(last=False)
    return bands


def _beta_of(frame_or_beta) -> np.ndarray:
    beta = getattr(frame_or_beta, "beta", frame_or_beta)
    return np.asarray(beta, dtype=np.float64)


def axis_aligned_direction(beta: np.ndarray) -> int | None:
    """Return the coordinate axis beta is (anti-)parallel to, else None."""
    for ax in range(3):
        if abs(abs(beta[ax]) - 1.0) <= 1e-12 and all(
            abs(beta[o]) <= 1e-12 for o in range(3) if o != ax
        ):
            return ax
    return None


def project_perp(
    f: SpectralField, k, frame_or_beta, lowpass: bool = False
) -> SpectralField:
    """Perpendicular dyadic projector: multiplier phi(2^-k |xi x beta|)
    (chi for the lowpass variant)."""
    return _project(f, k, frame_or_beta, "perp", lowpass)


def project_par(
    f: SpectralField, l, frame_or_beta, lowpass: bool = False
) -> SpectralField:
    """Parallel dyadic projector: multiplier phi(2^-l |xi . beta|)."""
    return _project(f, l, frame_or_beta, "par", lowpass)


def _project(f, k, frame_or_beta, direction, lowpass):
    if k == "lowpass":
        raise ValueError("pass an integer shell plus lowpass=True for the chi filter")
    k = int(k)
    bands = get_bands(f.grid, _beta_of(frame_or_beta))
    dw = bands.weights(direction)
    if not lowpass and k > dw.k_max:
        warnings.warn(
            f"{direction} shell k={k} lies beyond the grid Nyquist; returning zero",
            EmptyBandWarning,
            stacklevel=2,
        )
    return f.apply_multiplier(bands.band_multiplier(direction, k, lowpass))


def block_project(f: SpectralField, idx: BandIndex, frame_or_beta) -> SpectralField:
    """Apply both directional filters of one dyadic cell."""
    out = f
    if idx.k == "lowpass":
        out = project_perp(out, 0, frame_or_beta, lowpass=True)
    else:
        out = project_perp(out, idx.k, frame_or_beta)
    if idx.l == "lowpass":
        out = project_par(out, 0, frame_or_beta, lowpass=True)
    else:
        out = project_par(out, idx.l, frame_or_beta)
    return out


# ---------------------------------------------------------------------------
# Norms


@dataclass(frozen=True)
class NormSpec:
    """Anisotropic norm selector.

    ``s1``/``q1`` act on perpendicular shells (outer sum), ``s2``/``q2`` on
    parallel shells (inner sum); ``p`` is the Lebesgue exponent of the
    band-wise norms.  Mixed bands with p != 2 require an axis-aligned frame.
    """

    s1: float
    s2: float
    p: float = 2.0
    q1: float = 2.0
    q2: float = 2.0
    kind: str = "besov"

    def __post_init__(self) -> None:
        if self.p not in (1.0, 2.0, math.inf):
            raise UnsupportedCombinationError(f"p must be 1, 2 or inf, got {self.p}")
        for q in (self.q1, self.q2):
            if not (1.0 <= q or q == math.inf):
                raise UnsupportedCombinationError(f"sequence exponents need q >= 1, got {q}")
        if self.kind not in ("besov", "sobolev"):
            raise ValueError(f"kind must be 'besov' or 'sobolev', got {self.kind}")


def aniso_sobolev_norm(
    f: SpectralField, s1: float, s2: float, frame_or_beta, strict: bool = False
) -> NormResult:
    """Multiplier norm with weight |xi x beta|^{2 s1} |xi . beta|^{2 s2}.

    Modes where a negative exponent meets a vanishing symbol are excluded
    and their L2 mass reported; ``strict=True`` raises instead.
    """
    f.require_mean_zero("aniso_sobolev_norm")
    bands = get_bands(f.grid, _beta_of(frame_or_beta))
    mag2 = np.abs(f.coeffs) ** 2
    if f.is_vector:
        mag2 = mag2.sum(axis=0)

    excluded = np.zeros(f.grid.shape, dtype=bool)
    if s1 < 0:
        excluded |= bands.perp.degenerate
    if s2 < 0:
        excluded |= bands.par.degenerate
    excluded_mass = float(VOLUME * mag2[excluded].sum())
    carried = int(np.count_nonzero(excluded & (mag2 > 0)))
    if strict and carried:
        modes = np.argwhere(excluded & (mag2 > 0))[:8]
        raise DegenerateNormError(
            f"negative exponent meets vanishing symbol on {carried} carried modes, "
            f"e.g. wavevectors {modes.tolist()}"
        )

    w = np.ones(f.grid.shape)
    if s1 != 0:
        rp = np.where(bands.perp.degenerate, 1.0, bands.r_perp)
        w *= np.where(bands.perp.degenerate, 0.0 if s1 > 0 else 1.0, rp ** (2.0 * s1))
    if s2 != 0:
        rl = np.where(bands.par.degenerate, 1.0, bands.r_par)
        w *= np.where(bands.par.degenerate, 0.0 if s2 > 0 else 1.0, rl ** (2.0 * s2))
    w[excluded] = 0.0
    value = float(np.sqrt(VOLUME * np.sum(w * mag2)))
    return NormResult(value=value, excluded_mass=excluded_mass, n_excluded=carried)


def _sequence_norm(values: np.ndarray, q: float, axis: int) -> np.ndarray:
    if q == math.inf:
        return values.max(axis=axis)
    return (values**q).sum(axis=axis) ** (1.0 / q)


def aniso_besov_norm(
    f: SpectralField, spec: NormSpec, frame_or_beta
) -> NormResult:
    """Mixed dyadic norm, inner l^{q2} over parallel shells first, outer
    l^{q1} over perpendicular shells, exactly in that order."""
    f.require_mean_zero("aniso_besov_norm")
    beta = _beta_of(frame_or_beta)
    bands = get_bands(f.grid, beta)
    excl_mass, n_excl = bands.degenerate_mass(f)

    if spec.p == 2.0:
        m_sq, ks, ls = bands.band_l2_sq_matrix(f)
        band_norms = np.sqrt(m_sq)
    else:
        if axis_aligned_direction(beta) is None:
            raise UnsupportedCombinationError(
                "band-wise L^p norms with p != 2 need an axis-aligned frame"
            )
        ks = bands.perp.shell_indices()
        ls = bands.par.shell_indices()
        band_norms = np.zeros((len(ks), len(ls)))
        dx3 = f.grid.dx**3
        for i, k in enumerate(ks):
            fk = project_perp(f, k, beta)
            if not np.any(fk.coeffs):
                continue
            for j, l in enumerate(ls):
                g = project_par(fk, l, beta)
                if not np.any(g.coeffs):
                    continue
                vals = np.abs(to_physical(g))
                if g.is_vector:
                    vals = np.sqrt((vals**2).sum(axis=0))
                if spec.p == math.inf:
                    band_norms[i, j] = vals.max()
                else:
                    band_norms[i, j] = float((vals**spec.p).sum() * dx3) ** (1.0 / spec.p)

    lweights = np.exp2(np.asarray(list(ls), dtype=np.float64) * spec.s2)
    kweights = np.exp2(np.asarray(list(ks), dtype=np.float64) * spec.s1)
    inner = _sequence_norm(band_norms * lweights[None, :], spec.q2, axis=1)
    value = float(_sequence_norm(inner * kweights, spec.q1, axis=0))
    return NormResult(value=value, excluded_mass=excl_mass, n_excluded=n_excl)


def mixed_lebesgue_norm(values: np.ndarray, grid: Grid, p_perp: float, q_par: float, par_axis: int) -> float:
    """L^p over the perpendicular plane of the L^q norm along the parallel
    axis (physical-space quadrature; axis-aligned frames only)."""
    dx = grid.dx
    v = np.abs(np.asarray(values, dtype=np.float64))
    if q_par == math.inf:
        inner = v.max(axis=par_axis)
    else:
        inner = ((v**q_par).sum(axis=par_axis) * dx) ** (1.0 / q_par)
    if p_perp == math.inf:
        return float(inner.max())
    return float(((inner**p_perp).sum() * dx * dx) ** (1.0 / p_perp))


# ---------------------------------------------------------------------------
# Bony decomposition


@dataclass
class BonyDecomposition:
    low_high: SpectralField  # T_a b
    high_low: SpectralField  # T_b a
    remainder: SpectralField  # R(a, b)
    truncated: bool = False

    def reconstruction(self) -> SpectralField:
        return self.low_high + self.high_low + self.remainder


def bony_decompose(
    a: SpectralField, b: SpectralField, direction: str, frame_or_beta
) -> BonyDecomposition:
    """Paraproduct split of the (dealiased) product a*b in the chosen
    direction: T_a b = sum_k S_{k-1} a Delta_k b, remainder over the three
    diagonal neighbours."""
    if a.is_vector or b.is_vector:
        raise ValueError("bony_decompose expects scalar fields")
    a.require_mean_zero("bony_decompose")
    b.require_mean_zero("bony_decompose")
    beta = _beta_of(frame_or_beta)
    bands = get_bands(a.grid, beta)
    dw = bands.weights(direction)

    truncated = False
    for f in (a, b):
        mag2 = np.abs(f.coeffs) ** 2
        if f.is_vector:
            mag2 = mag2.sum(axis=0)
        outside = float(mag2[~f.grid.dealias_mask].sum())
        if outside > 1e-12 * max(float(mag2.sum()), 1e-300):
            truncated = True
    if truncated:
        warnings.warn(
            "operands occupy modes outside the dealias range; "
            "reconstruction only matches the truncated product",
            TruncationWarning,
            stacklevel=2,
        )

    grid = a.grid
    t_ab = SpectralField(grid, np.zeros_like(a.coeffs))
    t_ba = SpectralField(grid, np.zeros_like(a.coeffs))
    rem = SpectralField(grid, np.zeros_like(a.coeffs))
    r = bands.r_perp if direction == "perp" else bands.r_par
    for k in dw.shell_indices():
        dk_mult = bands.band_multiplier(direction, k)
        tilde_mult = (
            bands.band_multiplier(direction, k - 1)
            + dk_mult
            + bands.band_multiplier(direction, k + 1)
        )
        low_mult = bands.cutoffs.chi(r * 2.0 ** (-float(k - 1)))
        dk_a = a.apply_multiplier(dk_mult)
        dk_b = b.apply_multiplier(dk_mult)
        if np.any(dk_b.coeffs):
            t_ab = t_ab + multiply(a.apply_multiplier(low_mult), dk_b)
        if np.any(dk_a.coeffs):
            t_ba = t_ba + multiply(b.apply_multiplier(low_mult), dk_a)
            tilde_b = b.apply_multiplier(tilde_mult)
            if np.any(tilde_b.coeffs):
                rem = rem + multiply(dk_a, tilde_b)
    return BonyDecomposition(low_high=t_ab, high_low=t_ba, remainder=rem, truncated=truncated)


# ---------------------------------------------------------------------------
# Overlap oracle for the dyadic-vs-multiplier norm comparison


def shell_weight_band(s: float, n_r: int = 20_000, cutoffs: Cutoffs = CUTOFFS) -> tuple[float, float]:
    """Range of W_s(r) = sum_j 2^{2 j s} phi(2^-j r)^2 / r^{2s} over r > 0.

    W_s is log-periodic with period 2, so one period is scanned densely.
    """
    r = np.exp2(np.linspace(0.0, 1.0, n_r, endpoint=False))
    w = np.zeros_like(r)
    for j in range(-3, 4):
        w += np.exp2(2.0 * s * j) * cutoffs.phi(r * 2.0 ** (-float(j))) ** 2
    w /= r ** (2.0 * s)
    return float(w.min()), float(w.max())


def besov_sobolev_band(s1: float, s2: float) -> tuple[float, float]:
    """[c, C] such that the (2,2,2) dyadic norm over the multiplier norm lies
    in [c, C] for every field without degenerate-mode mass."""
    lo1, hi1 = shell_weight_band(s1)
    lo2, hi2 = shell_weight_band(s2)
    return math.sqrt(lo1 * lo2), math.sqrt(hi1 * hi2)
