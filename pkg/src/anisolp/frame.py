"""Time-varying orthonormal frames (tau, nu, beta) from a sampled unit path.

A path is admissible when it maps [0, T] to the unit sphere, has finitely
many marked jump discontinuities, and has square-summable forward differences
between jumps.  The frame construction subdivides the path into segments on
which the accumulated direction change is small (discrete mass condition
``sqrt(len) * ||beta'||_L2 < 1/5`` per segment), picks per segment the
coordinate axis along which |beta| stays below 4/5, and completes beta to a
right-handed orthonormal triple with explicit formulas.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSegmentError,
    InvalidPathError,
    PartitionError,
)

#: per-segment ceiling for sqrt(length) * ||beta'||_{L2(segment)}
SEGMENT_MASS_BOUND = 0.2

#: asserted ceiling for (|tau'| + |nu'|) / |beta'| inside segments
DERIVATIVE_RATIO_BOUND = 10.0

_UNIT_TOL = 1e-12
_ORTHO_TOL = 1e-10


@dataclass
class UnitPath:
    """Sampled unit-vector path with jump markers.

    ``values[j]`` is the vector at ``times[j]``; a jump index J marks a
    discontinuity at ``times[J]`` (``values[J]`` is the right limit, samples
    ``< J`` belong to the left smooth piece).
    """

    times: np.ndarray
    values: np.ndarray
    jump_indices: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        self.jump_indices = tuple(sorted(int(j) for j in set(self.jump_indices)))
        m = len(self.times)
        if self.values.shape != (m, 3):
            raise InvalidPathError(
                f"values shape {self.values.shape} does not match {m} samples"
            )
        if m < 2:
            raise InvalidPathError("path needs at least two samples")
        if not np.all(np.diff(self.times) > 0):
            raise InvalidPathError("sample times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise InvalidPathError("path values must be finite")
        norms = np.linalg.norm(self.values, axis=1)
        worst = np.max(np.abs(norms - 1.0))
        if worst > _UNIT_TOL:
            raise InvalidPathError(f"path values must be unit vectors (off by {worst:g})")
        for j in self.jump_indices:
            if not (0 < j < m):
                raise InvalidPathError(f"jump index {j} outside (0, {m})")

    @property
    def n_samples(self) -> int:
        return len(self.times)

    def piece_slices(self) -> list[tuple[int, int]]:
        """Sample ranges [a, b) of the smooth pieces between jumps."""
        bounds = (0, *self.jump_indices, self.n_samples)
        return list(zip(bounds[:-1], bounds[1:]))

    def forward_differences(self) -> np.ndarray:
        """Discrete derivative (m-1, 3); entries on jump cells are zeroed."""
        dt = np.diff(self.times)[:, None]
        d = np.diff(self.values, axis=0) / dt
        for j in self.jump_indices:
            d[j - 1] = 0.0
        return d


@dataclass
class PathSegment:
    """Inclusive sample range [start, stop] with its covering time interval.

    Adjacent segments within a smooth piece share their boundary sample; the
    shared sample is OWNED by the later segment (piece-final segments own
    their stop sample).
    """

    start: int
    stop: int
    t0: float
    t1: float
    axis: int = -1  # special axis chosen by build_frame
    piece_final: bool = False

    def owned(self) -> tuple[int, int]:
        """Inclusive range of samples whose frame values this segment sets."""
        return (self.start, self.stop if self.piece_final else self.stop - 1)


@dataclass
class FrameSample:
    """Frame evaluated at one time, optionally with time derivatives."""

    tau: np.ndarray
    nu: np.ndarray
    beta: np.ndarray
    tau_p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    nu_p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    beta_p: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def derivative_sq(self) -> float:
        """|tau'|^2 + |nu'|^2 + |beta'|^2."""
        return float(
            np.dot(self.tau_p, self.tau_p)
            + np.dot(self.nu_p, self.nu_p)
            + np.dot(self.beta_p, self.beta_p)
        )


@dataclass
class Frame:
    """Orthonormal triple sampled on the path mesh, plus the segment table."""

    path_tau: UnitPath
    path_nu: UnitPath
    path_beta: UnitPath
    segment_table: list[PathSegment]

    @property
    def times(self) -> np.ndarray:
        return self.path_beta.times

    @property
    def n_samples(self) -> int:
        return self.path_beta.n_samples

    def segment_ids(self) -> np.ndarray:
        ids = np.empty(self.n_samples, dtype=np.int64)
        for sid, seg in enumerate(self.segment_table):
            lo, hi = seg.owned()
            ids[lo : hi + 1] = sid
        return ids

    def sample(self, i: int, derivs: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None) -> FrameSample:
        fs = FrameSample(
            tau=self.path_tau.values[i].copy(),
            nu=self.path_nu.values[i].copy(),
            beta=self.path_beta.values[i].copy(),
        )
        if derivs is not None:
            fs.tau_p, fs.nu_p, fs.beta_p = (d[i].copy() for d in derivs)
        return fs

    def at_time(self, t: float, derivs=None) -> FrameSample:
        """Frame at arbitrary t: exact at samples, else interpolated within
        the segment and re-orthonormalized."""
        times = self.times
        i = int(np.searchsorted(times, t))
        if i < len(times) and abs(times[i] - t) < 1e-12:
            return self.sample(i, derivs)
        if i == 0 or i >= len(times):
            raise ValueError(f"t={t} outside the frame mesh [{times[0]}, {times[-1]}]")
        lo, hi = i - 1, i
        w = (t - times[lo]) / (times[hi] - times[lo])
        b = (1 - w) * self.path_beta.values[lo] + w * self.path_beta.values[hi]
        b = b / np.linalg.norm(b)
        nu_raw = (1 - w) * self.path_nu.values[lo] + w * self.path_nu.values[hi]
        nu = nu_raw - np.dot(nu_raw, b) * b
        nu = nu / np.linalg.norm(nu)
        tau = np.cross(nu, b)
        fs = FrameSample(tau=tau, nu=nu, beta=b)
        if derivs is not None:
            dt, dn, db = derivs
            fs.tau_p = (1 - w) * dt[lo] + w * dt[hi]
            fs.nu_p = (1 - w) * dn[lo] + w * dn[hi]
            fs.beta_p = (1 - w) * db[lo] + w * db[hi]
        return fs


def partition_path(beta: UnitPath) -> list[PathSegment]:
    """Subdivide between jumps so each segment obeys the mass condition.

    Greedy maximal segments; per segment,
    ``sqrt(t_stop - t_start) * ||beta'||_{L2(segment)} < 1/5``
    on the discrete trapezoid-free (rectangle) quadrature of forward
    differences.  Original jump times always appear among boundaries.
    """
    times = beta.times
    d = beta.forward_differences()
    cell_mass = np.sum(d**2, axis=1) * np.diff(times)  # |beta'|^2 dt per cell
    bound_sq = SEGMENT_MASS_BOUND**2

    segments: list[PathSegment] = []
    pieces = beta.piece_slices()
    for a, b in pieces:
        if b - a < 2:
            raise InvalidPathError(
                "jump markers leave a smooth piece with fewer than two samples"
            )
        cum = np.concatenate([[0.0], np.cumsum(cell_mass[a : b - 1])])
        start = a
        while start < b - 1:
            stop = start + 1
            # extend while the enlarged segment still satisfies the bound
            while stop < b - 1:
                length = times[stop + 1] - times[start]
                mass = cum[stop + 1 - a] - cum[start - a]
                if length * mass < bound_sq:
                    stop += 1
                else:
                    break
            length = times[stop] - times[start]
            mass = cum[stop - a] - cum[start - a]
            if length * mass >= bound_sq:
                raise PartitionError(
                    f"single mesh cell near t={times[start]:g} already violates "
                    "the segment mass condition; sample the path more finely"
                )
            final = stop == b - 1
            t1 = times[stop]
            if final:  # piece-final: cover up to the next piece / T
                t1 = times[b] if b < beta.n_samples else times[b - 1]
            segments.append(
                PathSegment(start=start, stop=stop, t0=times[start], t1=t1, piece_final=final)
            )
            start = stop
        _rebalance_tail(segments, times, cum, a, bound_sq)
    return segments


def _rebalance_tail(segments: list[PathSegment], times, cum, piece_offset: int, bound_sq: float) -> None:
    """Greedy maximal cuts can leave a piece-final segment too short for a
    derivative stencil; borrow cells from its predecessor when both segments
    still satisfy the mass condition afterwards."""
    if len(segments) < 2:
        return
    tail = segments[-1]
    prev = segments[-2]
    if not (tail.piece_final and prev.start >= piece_offset) or prev.piece_final:
        return
    while tail.stop - tail.start < 3 and prev.stop - prev.start > 3:
        new_cut = prev.stop - 1
        tail_len = times[tail.stop] - times[new_cut]
        tail_mass = cum[tail.stop - piece_offset] - cum[new_cut - piece_offset]
        if tail_len * tail_mass >= bound_sq:
            break
        prev.stop = new_cut
        prev.t1 = times[new_cut]
        tail.start = new_cut
        tail.t0 = times[new_cut]


def _special_axis(v: np.ndarray) -> int:
    """Axis with the smallest |component|; ties break toward axis 3."""
    mags = np.abs(v)
    best = 2
    for ax in (1, 0):
        if mags[ax] < mags[best]:
            best = ax
    # a unit vector always has a component of magnitude <= 1/sqrt(3) < 3/5
    assert mags[best] < 0.6, "no admissible special axis (impossible for a unit vector)"
    return best


def _frame_on_segment(values: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Apply the completion formulas under the cyclic permutation with the
    special axis last: nu = (-b_q, b_p, 0)/sqrt(1-b_r^2) in permuted
    coordinates, tau = nu x beta."""
    p, q, r = (axis + 1) % 3, (axis + 2) % 3, axis
    br = values[:, r]
    if np.max(np.abs(br)) >= 0.8:
        raise PartitionError(
            "special-axis component reached 4/5 inside a segment; "
            "segment mass condition violated"
        )
    w = np.sqrt(1.0 - br**2)
    nu = np.zeros_like(values)
    nu[:, p] = -values[:, q] / w
    nu[:, q] = values[:, p] / w
    tau = np.cross(nu, values)
    return tau, nu


def build_frame(beta: UnitPath) -> Frame:
    """Construct the right-handed orthonormal frame along the path."""
    segments = partition_path(beta)
    m = beta.n_samples
    tau = np.empty((m, 3))
    nu = np.empty((m, 3))

    piece_starts = {a for a, _ in beta.piece_slices()}
    prev_axis: int | None = None
    artificial: list[int] = []
    for seg in segments:
        seg.axis = _special_axis(beta.values[seg.start])
        lo, hi = seg.owned()
        sl = slice(lo, hi + 1)
        tau[sl], nu[sl] = _frame_on_segment(beta.values[sl], seg.axis)
        if seg.start not in piece_starts and prev_axis is not None and seg.axis != prev_axis:
            artificial.append(seg.start)
        prev_axis = seg.axis

    tn_jumps = tuple(sorted(set(beta.jump_indices) | set(artificial)))
    frame = Frame(
        path_tau=UnitPath(beta.times.copy(), tau, tn_jumps),
        path_nu=UnitPath(beta.times.copy(), nu, tn_jumps),
        path_beta=beta,
        segment_table=segments,
    )
    validate_frame(frame)
    return frame


def validate_frame(frame: Frame, ortho_tol: float = _ORTHO_TOL) -> None:
    """Check orthonormality, orientation and the derivative-ratio bound."""
    t = frame.path_tau.values
    n = frame.path_nu.values
    b = frame.path_beta.values
    dots = (
        np.abs(np.sum(t * n, axis=1)).max(),
        np.abs(np.sum(n * b, axis=1)).max(),
        np.abs(np.sum(b * t, axis=1)).max(),
    )
    if max(dots) > ortho_tol:
        raise PartitionError(f"frame orthogonality violated by {max(dots):g}")
    vol = np.sum(t * np.cross(n, b), axis=1)
    if np.max(np.abs(vol - 1.0)) > ortho_tol:
        raise PartitionError(
            f"frame orientation tau.(nu x beta)=1 violated by {np.max(np.abs(vol - 1.0)):g}"
        )
    dt, dn, db = frame_derivatives(frame, _validate=False)
    ratio_num = np.linalg.norm(dt, axis=1) + np.linalg.norm(dn, axis=1)
    ratio_den = np.linalg.norm(db, axis=1)
    for seg in frame.segment_table:
        lo, hi = seg.owned()
        interior = slice(lo + 1, hi)
        bad = ratio_num[interior] > DERIVATIVE_RATIO_BOUND * ratio_den[interior] + 1e-9
        if np.any(bad):
            raise PartitionError("frame derivative bound |tau'|+|nu'| <= 10|beta'| violated")


def frame_derivatives(
    frame: Frame, _validate: bool = True
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Discrete (tau', nu', beta') on the frame mesh.

    Centered differences inside segments, one-sided at segment boundaries;
    differences never straddle a jump or a segment boundary.
    """
    if _validate and any(
        seg.owned()[1] - seg.owned()[0] < 2 for seg in frame.segment_table
    ):
        raise DegenerateSegmentError("a segment has fewer than 3 samples")
    times = frame.times
    out = []
    for path in (frame.path_tau, frame.path_nu, frame.path_beta):
        v = path.values
        d = np.zeros_like(v)
        for seg in frame.segment_table:
            s, e = seg.owned()
            if e - s < 1:
                continue  # single-sample ownership: derivative left at zero
            if e - s == 1:
                d[s] = d[e] = (v[e] - v[s]) / (times[e] - times[s])
                continue
            d[s] = (v[s + 1] - v[s]) / (times[s + 1] - times[s])
            d[e] = (v[e] - v[e - 1]) / (times[e] - times[e - 1])
            span = times[s + 2 : e + 1] - times[s : e - 1]
            d[s + 1 : e] = (v[s + 2 : e + 1] - v[s : e - 1]) / span[:, None]
        out.append(d)
    return out[0], out[1], out[2]


def constant_frame(beta_vec: np.ndarray) -> FrameSample:
    """Frame sample for a constant direction (zero derivatives)."""
    beta_vec = np.asarray(beta_vec, dtype=np.float64)
    nrm = np.linalg.norm(beta_vec)
    if abs(nrm - 1.0) > _UNIT_TOL:
        raise InvalidPathError(f"beta must be a unit vector, |beta|={nrm!r}")
    axis = _special_axis(beta_vec)
    tau, nu = _frame_on_segment(beta_vec[None, :], axis)
    return FrameSample(tau=tau[0], nu=nu[0], beta=beta_vec.copy())


def random_unit_path(
    seed: int,
    t_final: float = 1.0,
    n_samples: int = 400,
    n_jumps: int = 0,
    wobble: float = 0.4,
) -> UnitPath:
    """Reproducible smooth random path: normalized trigonometric polynomial
    per piece, with optional jump discontinuities."""
    rng = np.random.default_rng(seed)
    times = np.linspace(0.0, t_final, n_samples)
    jumps: list[int] = []
    if n_jumps > 0:
        cand = rng.choice(np.arange(2, n_samples - 2), size=n_jumps, replace=False)
        jumps = sorted(int(j) for j in cand)
        # drop markers that would create sub-2-sample pieces
        cleaned = []
        prev = 0
        for j in jumps:
            if j - prev >= 2:
                cleaned.append(j)
                prev = j
        jumps = [j for j in cleaned if n_samples - j >= 2]

    values = np.empty((n_samples, 3))
    bounds = (0, *jumps, n_samples)
    for a, b in zip(bounds[:-1], bounds[1:]):
        while True:
            base = rng.normal(size=3)
            base /= np.linalg.norm(base)
            amps = wobble * rng.normal(size=(3, 3)) / np.arange(1, 4)[None, :]
            phases = rng.uniform(0, 2 * np.pi, size=(3, 3))
            tt = times[a:b, None]
            v = base[None, :] + np.stack(
                [
                    (amps[c] * np.sin(2 * np.pi * np.arange(1, 4) * tt / t_final + phases[c])).sum(axis=1)
                    for c in range(3)
                ],
                axis=1,
            )
            nrm = np.linalg.norm(v, axis=1)
            if nrm.min() > 0.35:
                values[a:b] = v / nrm[:, None]
                break
    return UnitPath(times, values, tuple(jumps))


# ---------------------------------------------------------------------------
# CSV interfaces


def write_unit_path_csv(path: UnitPath, filename) -> None:
    jumps = set(path.jump_indices)
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "b1", "b2", "b3", "jump"])
        for i in range(path.n_samples):
            w.writerow(
                [repr(float(path.times[i]))]
                + [repr(float(x)) for x in path.values[i]]
                + [1 if i in jumps else 0]
            )


def read_unit_path_csv(filename) -> UnitPath:
    times, values, jumps = [], [], []
    with open(filename, newline="") as fh:
        r = csv.DictReader(fh)
        for i, row in enumerate(r):
            times.append(float(row["t"]))
            values.append([float(row["b1"]), float(row["b2"]), float(row["b3"])])
            if int(row["jump"]):
                jumps.append(i)
    return UnitPath(np.array(times), np.array(values), tuple(jumps))


def write_frame_csv(frame: Frame, filename) -> None:
    ids = frame.segment_ids()
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["t"]
            + [f"tau{i}" for i in (1, 2, 3)]
            + [f"nu{i}" for i in (1, 2, 3)]
            + [f"beta{i}" for i in (1, 2, 3)]
            + ["segment_id"]
        )
        for i in range(frame.n_samples):
            w.writerow(
                [repr(float(frame.times[i]))]
                + [repr(float(x)) for x in frame.path_tau.values[i]]
                + [repr(float(x)) for x in frame.path_nu.values[i]]
                + [repr(float(x)) for x in frame.path_beta.values[i]]
                + [int(ids[i])]
            )


def read_frame_csv(filename) -> Frame:
    """Rebuild a Frame from its CSV (segment table recovered from ids)."""
    times, tau, nu, beta, ids = [], [], [], [], []
    with open(filename, newline="") as fh:
        r = csv.DictReader(fh)
        for row in r:
            times.append(float(row["t"]))
            tau.append([float(row[f"tau{i}"]) for i in (1, 2, 3)])
            nu.append([float(row[f"nu{i}"]) for i in (1, 2, 3)])
            beta.append([float(row[f"beta{i}"]) for i in (1, 2, 3)])
            ids.append(int(row["segment_id"]))
    times = np.array(times)
    ids = np.array(ids)
    segments = []
    for sid in range(ids.max() + 1):
        idx = np.nonzero(ids == sid)[0]
        start, stop = int(idx[0]), int(idx[-1])
        t1 = times[stop + 1] if stop + 1 < len(times) else times[stop]
        segments.append(PathSegment(start=start, stop=stop, t0=times[start], t1=t1))
    # boundaries between recovered segments are treated as potential jumps
    # for the tau/nu paths so differences never straddle them
    tn_jumps = tuple(seg.start for seg in segments[1:])
    return Frame(
        path_tau=UnitPath(times, np.array(tau), tn_jumps),
        path_nu=UnitPath(times, np.array(nu), tn_jumps),
        path_beta=UnitPath(times, np.array(beta), tn_jumps),
        segment_table=segments,
    )
