"""Pseudo-spectral incompressible Navier-Stokes on the torus.

Time stepping is integrating-factor RK4: the viscous semigroup
exp(-nu |xi|^2 dt) is applied exactly, the dealiased and Leray-projected
advection term is advanced with classical RK4 weights.  The viscous
dissipation integral is accumulated with the same RK4 stage weights so the
discrete energy identity

    ||u(t)||^2 + 2 nu int_0^t ||grad u||^2 ds = ||u0||^2

holds to the integrator's accuracy, not just to quadrature order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .bands import get_bands
from .errors import InvalidFrameError, StepRejectedError
from .frame import FrameSample
from .spectral import (
    Grid,
    SpectralField,
    VOLUME,
    dealias,
    directional_derivative,
    divergence,
    from_physical,
    inv_laplacian,
    l2_norm,
    leray_project,
    sobolev_norm,
    to_physical,
)

CFL_SAFETY = 0.5


@dataclass
class FlowState:
    """Divergence-free velocity snapshot."""

    t: float
    u: SpectralField
    nu_visc: float = 1.0

    @property
    def grid(self) -> Grid:
        return self.u.grid


@dataclass
class DerivedFields:
    """Frame-adapted scalars and the horizontal Helmholtz split."""

    omega_beta: SpectralField  # directional vorticity d_tau u^nu - d_nu u^tau
    dbeta_ubeta: SpectralField  # d_beta u^beta
    u_curl: SpectralField  # curl part of u^h
    u_div: SpectralField  # divergence part of u^h
    u_h: SpectralField  # u - beta (u . beta)
    excluded_mass: float  # u^h mass on modes with xi x beta = 0


def abc_field(grid: Grid, a: float = 1.0, b: float = 1.0, c: float = 1.0) -> SpectralField:
    """ABC flow; for any coefficients curl u = u, an exact decaying solution."""
    x1, x2, x3 = grid.mesh()
    vals = np.stack(
        [
            a * np.sin(x3) + c * np.cos(x2),
            b * np.sin(x1) + a * np.cos(x3),
            c * np.sin(x2) + b * np.cos(x1),
        ]
    )
    return from_physical(grid, vals)


def taylor_green_field(grid: Grid) -> SpectralField:
    x1, x2, x3 = grid.mesh()
    vals = np.stack(
        [
            np.sin(x1) * np.cos(x2) * np.cos(x3),
            -np.cos(x1) * np.sin(x2) * np.cos(x3),
            np.zeros_like(x1),
        ]
    )
    return from_physical(grid, vals)


def shear_field(grid: Grid) -> SpectralField:
    """Unidirectional shear u = (0, cos x1, 0); advection vanishes."""
    x1, _, _ = grid.mesh()
    vals = np.stack([np.zeros_like(x1), np.cos(x1), np.zeros_like(x1)])
    return from_physical(grid, vals)


def advection(u: SpectralField) -> SpectralField:
    """Dealiased u . grad u computed in physical space."""
    g = u.grid
    u_phys = to_physical(u)
    out = np.zeros((3, *g.shape))
    for j, kj in enumerate((g.kx, g.ky, g.kz)):
        dj_u = to_physical(u.apply_multiplier(1j * kj))
        out += u_phys[j] * dj_u
    return dealias(from_physical(g, out))


def nonlinear_rhs(u: SpectralField) -> SpectralField:
    """-P_Leray(u . grad u), the advection + pressure part of du/dt."""
    return -leray_project(advection(u))


def time_derivative(state: FlowState) -> SpectralField:
    """Analytic du/dt of the discrete dynamics (viscous term included)."""
    visc = state.u.apply_multiplier(-state.nu_visc * state.grid.k_sq)
    return nonlinear_rhs(state.u) + visc


def pressure(u: SpectralField, frame: FrameSample | None = None) -> SpectralField:
    """Pressure field.

    Without a frame: -inv_laplacian(div(u . grad u)).  With a frame: the
    equivalent frame-wise sum -inv_laplacian(sum_{l,m} d_l u^m d_m u^l);
    both agree for divergence-free input.
    """
    if frame is None:
        return -1.0 * inv_laplacian(divergence(advection(u)).with_zero_mean())
    _check_frame(frame)
    from .spectral import multiply  # local import keeps module init light

    dirs = (frame.tau, frame.nu, frame.beta)
    g = u.grid
    total = SpectralField(g, np.zeros(g.shape, dtype=np.complex128))
    comps = [u.dot_constant(e) for e in dirs]
    for el, ul in zip(dirs, comps):
        for em, um in zip(dirs, comps):
            total = total + multiply(
                directional_derivative(um, el), directional_derivative(ul, em)
            )
    return -1.0 * inv_laplacian(total.with_zero_mean())


def _check_frame(frame: FrameSample) -> None:
    m = np.stack([frame.tau, frame.nu, frame.beta])
    if np.max(np.abs(m @ m.T - np.eye(3))) > 1e-10 or np.linalg.det(m) < 0.5:
        raise InvalidFrameError("frame sample is not a right-handed orthonormal triple")


def max_velocity(u: SpectralField) -> float:
    vals = to_physical(u)
    return float(np.sqrt((vals**2).sum(axis=0)).max())


def cfl_limit(state: FlowState, safety: float = CFL_SAFETY) -> float:
    vmax = max_velocity(state.u)
    if vmax == 0.0:
        return np.inf
    return safety * state.grid.dx / vmax


def step(state: FlowState, dt: float, check_cfl: bool = True) -> FlowState:
    new_state, _ = step_with_budget(state, dt, check_cfl=check_cfl)
    return new_state


def step_with_budget(
    state: FlowState, dt: float, check_cfl: bool = True
) -> tuple[FlowState, float]:
    """Advance one step; also return the viscous dissipation increment
    2 nu int_t^{t+dt} ||grad u||^2 ds accumulated with RK4 stage weights."""
    if check_cfl:
        dt_max = cfl_limit(state)
        if dt > dt_max:
            raise StepRejectedError(dt, dt_max)
    g = state.grid
    nu = state.nu_visc
    e_half = np.exp(-nu * g.k_sq * dt / 2.0)
    e_full = e_half**2
    u0 = state.u

    def diss(f: SpectralField) -> float:
        return 2.0 * nu * sobolev_norm(f, 1.0) ** 2

    k1 = nonlinear_rhs(u0)
    q1 = diss(u0)
    s2 = SpectralField(g, (u0.coeffs + (dt / 2.0) * k1.coeffs) * e_half)
    k2 = nonlinear_rhs(s2)
    q2 = diss(s2)
    s3 = SpectralField(g, u0.coeffs * e_half + (dt / 2.0) * k2.coeffs)
    k3 = nonlinear_rhs(s3)
    q3 = diss(s3)
    s4 = SpectralField(g, u0.coeffs * e_full + dt * k3.coeffs * e_half)
    k4 = nonlinear_rhs(s4)
    q4 = diss(s4)

    new_coeffs = u0.coeffs * e_full + (dt / 6.0) * (
        k1.coeffs * e_full + 2.0 * (k2.coeffs + k3.coeffs) * e_half + k4.coeffs
    )
    new_coeffs[..., g.nyquist_mask] = 0.0
    new_u = SpectralField(g, new_coeffs)
    budget = (dt / 6.0) * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
    return FlowState(t=state.t + dt, u=new_u, nu_visc=nu), budget


@dataclass
class RunSample:
    state: FlowState
    dissipation_accum: float

    @property
    def energy(self) -> float:
        return l2_norm(self.state.u) ** 2


def run(
    state: FlowState, dt: float, n_steps: int, check_cfl: bool = True
) -> Iterator[RunSample]:
    """Yield the initial state and every stepped state with the running
    dissipation integral."""
    accum = 0.0
    yield RunSample(state=state, dissipation_accum=accum)
    for _ in range(n_steps):
        state, inc = step_with_budget(state, dt, check_cfl=check_cfl)
        accum += inc
        yield RunSample(state=state, dissipation_accum=accum)


def derived_quantities(u: SpectralField, frame: FrameSample) -> DerivedFields:
    """Directional vorticity, parallel stretch and the horizontal Helmholtz
    split; modes with xi x beta = 0 are assigned zero in both parts and
    their u^h mass is reported."""
    _check_frame(frame)
    tau, nu_v, beta = frame.tau, frame.nu, frame.beta
    u_tau = u.dot_constant(tau)
    u_nu = u.dot_constant(nu_v)
    u_beta = u.dot_constant(beta)

    omega = directional_derivative(u_nu, tau) - directional_derivative(u_tau, nu_v)
    dbeta_ubeta = directional_derivative(u_beta, beta)

    g = u.grid
    uh_coeffs = u.coeffs - beta[:, None, None, None] * u_beta.coeffs[None, ...]
    u_h = SpectralField(g, uh_coeffs)

    bands = get_bands(g, beta)
    degenerate = bands.perp.degenerate
    inv_rp2 = np.where(degenerate, 0.0, -1.0 / np.where(degenerate, 1.0, bands.r_perp**2))

    def horiz_vec(scalar: SpectralField, perp_rot: bool) -> SpectralField:
        d_tau = directional_derivative(scalar, tau)
        d_nu = directional_derivative(scalar, nu_v)
        out = np.empty((3, *g.shape), dtype=np.complex128)
        if perp_rot:  # grad_h^perp = -tau d_nu + nu d_tau
            for i in range(3):
                out[i] = -tau[i] * d_nu.coeffs + nu_v[i] * d_tau.coeffs
        else:  # grad_h = tau d_tau + nu d_nu
            for i in range(3):
                out[i] = tau[i] * d_tau.coeffs + nu_v[i] * d_nu.coeffs
        return SpectralField(g, out)

    u_curl = horiz_vec(omega.apply_multiplier(inv_rp2), perp_rot=True)
    u_div = -1.0 * horiz_vec(dbeta_ubeta.apply_multiplier(inv_rp2), perp_rot=False)

    mag2 = (np.abs(uh_coeffs) ** 2).sum(axis=0)
    excluded_mass = float(VOLUME * mag2[degenerate].sum())
    return DerivedFields(
        omega_beta=omega,
        dbeta_ubeta=dbeta_ubeta,
        u_curl=u_curl,
        u_div=u_div,
        u_h=u_h,
        excluded_mass=excluded_mass,
    )
