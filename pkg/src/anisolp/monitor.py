"""Along-trajectory diagnostics: the regularity-criterion integral, spectral
residuals of the frame-adapted evolution system and energy identities, and
the minimal constant realizing the a-priori inequality.

All time derivatives of diagnostic norms are evaluated analytically from the
discrete right-hand side du/dt (chain rule), never by differencing snapshots,
so the monitored identities are algebraic in spectral space and hold to
roundoff on band-limited states.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import MeshMismatchWarning
from .frame import Frame, FrameSample, frame_derivatives
from .solver import FlowState, advection, derived_quantities, pressure, time_derivative
from .spectral import (
    SpectralField,
    dealias,
    directional_derivative,
    from_physical,
    inv_laplacian,
    l2_inner,
    l2_norm,
    multiply,
    sobolev_norm,
    to_physical,
)

_EPS = 1e-300


def _deriv_along(f: SpectralField, w: np.ndarray) -> SpectralField:
    """w . grad f for a constant (not necessarily unit) vector w."""
    return f.apply_multiplier(1j * f.grid.wavevector_dot(np.asarray(w, dtype=np.float64)))


def _advect(u_phys: np.ndarray, f: SpectralField) -> SpectralField:
    """Dealiased u . grad f from a precomputed physical velocity."""
    g = f.grid
    out = np.zeros(g.shape)
    for j, kj in enumerate((g.kx, g.ky, g.kz)):
        out += u_phys[j] * to_physical(f.apply_multiplier(1j * kj))
    return dealias(from_physical(g, out))


def _dot_fields(a_parts, b_parts) -> SpectralField:
    total = None
    for a, b in zip(a_parts, b_parts):
        term = multiply(a, b)
        total = term if total is None else total + term
    return total


def criterion_integrand(u: SpectralField, beta: np.ndarray) -> float:
    """||u . beta||^2 in the homogeneous 3/2-Sobolev norm."""
    return sobolev_norm(u.dot_constant(np.asarray(beta, dtype=np.float64)), 1.5) ** 2


def _curl_h(w: SpectralField, fs: FrameSample) -> SpectralField:
    return directional_derivative(w.dot_constant(fs.nu), fs.tau) - directional_derivative(
        w.dot_constant(fs.tau), fs.nu
    )


def _frame_source_omega(u: SpectralField, fs: FrameSample) -> SpectralField:
    """tau' . (grad u^nu - d_nu u) + nu' . (d_tau u - grad u^tau)."""
    term = _deriv_along(u.dot_constant(fs.nu), fs.tau_p)
    term = term - directional_derivative(u.dot_constant(fs.tau_p), fs.nu)
    term = term + directional_derivative(u.dot_constant(fs.nu_p), fs.tau)
    term = term - _deriv_along(u.dot_constant(fs.tau), fs.nu_p)
    return term


def _frame_source_q(u: SpectralField, fs: FrameSample) -> SpectralField:
    """beta' . (d_beta u + grad u^beta)."""
    return directional_derivative(u.dot_constant(fs.beta_p), fs.beta) + _deriv_along(
        u.dot_constant(fs.beta), fs.beta_p
    )


def _stretch_terms(u: SpectralField, fs: FrameSample) -> tuple[SpectralField, SpectralField]:
    """(d_beta u^h . grad_h^perp u^beta,  d_beta u^h . grad_h u^beta).

    The first (rotated) pairing is the one that closes the vorticity balance
    exactly; the second appears in the pressure-mediated balance.
    """
    ub = u.dot_constant(fs.beta)
    d_tau_ub = directional_derivative(ub, fs.tau)
    d_nu_ub = directional_derivative(ub, fs.nu)
    dbeta_uh = [
        directional_derivative(u.dot_constant(fs.tau), fs.beta),
        directional_derivative(u.dot_constant(fs.nu), fs.beta),
    ]
    perp = _dot_fields(dbeta_uh, [-1.0 * d_nu_ub, d_tau_ub])
    plain = _dot_fields(dbeta_uh, [d_tau_ub, d_nu_ub])
    return perp, plain


@dataclass
class EvolutionResiduals:
    r_omega: float
    r_dbeta: float
    frame_term_omega: float  # L2 size of the omitted tau'/nu' source
    frame_term_dbeta: float


def verify_evolution_system(
    state: FlowState,
    fs: FrameSample,
    include_frame_terms: bool = True,
) -> EvolutionResiduals:
    """Relative L2 residuals of both evolution equations for the directional
    vorticity and the parallel stretch.

    ``include_frame_terms=False`` drops the tau'/nu'/beta' source terms while
    keeping the true time derivative of the diagnostics (the ablation that
    shows those terms are required when the frame rotates)."""
    u = state.u
    g = state.grid
    ut = time_derivative(state)
    u_phys = to_physical(u)
    dq = derived_quantities(u, fs)
    omega, q = dq.omega_beta, dq.dbeta_ubeta

    src_omega = _frame_source_omega(u, fs)
    src_q = _frame_source_q(u, fs)

    # true d/dt of the diagnostics: transported part plus frame rotation
    dt_omega = _curl_h(ut, fs) + src_omega
    dt_q = directional_derivative(ut.dot_constant(fs.beta), fs.beta) + src_q

    stretch_perp, _ = _stretch_terms(u, fs)

    terms1 = [
        dt_omega,
        _advect(u_phys, omega),
        -1.0 * omega.apply_multiplier(-state.nu_visc * g.k_sq),
        -1.0 * multiply(q, omega),
        stretch_perp,
    ]
    if include_frame_terms:
        terms1.append(-1.0 * src_omega)

    p_field = pressure(u)
    dbb = fs.beta
    press_term = directional_derivative(directional_derivative(p_field, dbb), dbb)
    grad_ubeta_cart = SpectralField(
        g,
        np.stack(
            [
                (1j * kj) * u.dot_constant(fs.beta).coeffs
                for kj in (g.kx, g.ky, g.kz)
            ]
        ),
    )
    dbeta_u = SpectralField(
        g, (1j * g.wavevector_dot(fs.beta))[None, ...] * u.coeffs
    )
    stretch_full = _dot_fields(
        [dbeta_u.component(i) for i in range(3)],
        [grad_ubeta_cart.component(i) for i in range(3)],
    )
    terms2 = [
        dt_q,
        _advect(u_phys, q),
        -1.0 * q.apply_multiplier(-state.nu_visc * g.k_sq),
        stretch_full,
        press_term,
    ]
    if include_frame_terms:
        terms2.append(-1.0 * src_q)

    def rel_residual(terms: list[SpectralField]) -> float:
        total = terms[0]
        for t in terms[1:]:
            total = total + t
        scale = max(max(l2_norm(t) for t in terms), _EPS)
        return l2_norm(total) / scale

    return EvolutionResiduals(
        r_omega=rel_residual(terms1),
        r_dbeta=rel_residual(terms2),
        frame_term_omega=l2_norm(src_omega),
        frame_term_dbeta=l2_norm(src_q),
    )


@dataclass
class EnergyIdentityReport:
    r51: float
    r56: float
    r62: float
    i_terms: tuple[float, float, float]
    ii_terms: tuple[float, float, float]
    ddt_omega_sq: float  # d/dt ||omega||^2 (chain rule)
    ddt_q_sq: float
    diss_omega: float  # ||grad omega||^2
    diss_q: float


def energy_identity_residuals(state: FlowState, fs: FrameSample) -> EnergyIdentityReport:
    """Residuals of the three L2 energy balances, plus their source terms."""
    u = state.u
    g = state.grid
    nu = state.nu_visc
    ut = time_derivative(state)
    u_phys = to_physical(u)
    dq = derived_quantities(u, fs)
    omega, q = dq.omega_beta, dq.dbeta_ubeta

    src_omega = _frame_source_omega(u, fs)
    src_q = _frame_source_q(u, fs)
    dt_omega = _curl_h(ut, fs) + src_omega
    dt_q = directional_derivative(ut.dot_constant(fs.beta), fs.beta) + src_q

    diss_omega = nu * sobolev_norm(omega, 1.0) ** 2
    diss_q = nu * sobolev_norm(q, 1.0) ** 2

    def rel(lhs: float, rhs: float, *terms: float) -> float:
        # scale includes the constituent terms so identically-cancelling
        # balances (decaying degenerate flows) read as zero residual
        return abs(lhs - rhs) / max(abs(lhs), abs(rhs), *map(abs, terms), _EPS)

    # first balance: directional vorticity
    i1 = l2_inner(src_omega, omega)
    i2 = l2_inner(multiply(q, omega), omega)
    stretch_perp, stretch_plain = _stretch_terms(u, fs)
    i3 = -l2_inner(stretch_perp, omega)
    lhs1 = l2_inner(omega, dt_omega) + diss_omega
    rhs1 = i1 + i2 + i3
    r51 = rel(lhs1, rhs1, diss_omega, i1, i2, i3)

    # second balance: parallel stretch, pressure split through d_beta^2 / Lap
    a_mult = np.zeros(g.shape)
    nonzero = g.k_sq > 0
    dotb = g.wavevector_dot(fs.beta)
    a_mult[nonzero] = (dotb[nonzero] ** 2) / g.k_sq[nonzero]

    q_sq = multiply(q, q)
    dirs_h = (fs.tau, fs.nu)
    s_tn = None
    for el in dirs_h:
        for em in dirs_h:
            term = multiply(
                directional_derivative(u.dot_constant(em), el),
                directional_derivative(u.dot_constant(el), em),
            )
            s_tn = term if s_tn is None else s_tn + term
    ii1 = l2_inner(src_q, q)
    ii2 = l2_inner(
        q_sq.apply_multiplier(a_mult) - q_sq + s_tn.apply_multiplier(a_mult), q
    )
    ii3 = l2_inner(stretch_plain.apply_multiplier(2.0 * a_mult) - stretch_plain, q)
    lhs2 = l2_inner(q, dt_q) + diss_q
    rhs2 = ii1 + ii2 + ii3
    r56 = rel(lhs2, rhs2, diss_q, ii1, ii2, ii3)

    # gradient balance: 1/2 d/dt ||grad u||^2 + ||grad^2 u||^2 = -int B
    grad2_sq = sobolev_norm(u, 2.0) ** 2
    lhs3 = l2_inner(SpectralField(g, u.coeffs * g.k_sq), ut) + grad2_sq
    b_int = b_integral(u)
    r62 = rel(lhs3, -b_int, grad2_sq)

    return EnergyIdentityReport(
        r51=r51,
        r56=r56,
        r62=r62,
        i_terms=(i1, i2, i3),
        ii_terms=(ii1, ii2, ii3),
        ddt_omega_sq=2.0 * l2_inner(omega, dt_omega),
        ddt_q_sq=2.0 * l2_inner(q, dt_q),
        diss_omega=diss_omega,
        diss_q=diss_q,
    )


def _grad_phys(f: SpectralField) -> list[np.ndarray]:
    g = f.grid
    return [to_physical(f.apply_multiplier(1j * kj)) for kj in (g.kx, g.ky, g.kz)]


def b_pointwise(u: SpectralField) -> np.ndarray:
    """B = sum_{i,j} (d_i u . grad u_j) d_i u_j on grid nodes (Cartesian
    contraction; frame choice drops out)."""
    du = [_grad_phys(u.component(j)) for j in range(3)]  # du[j][i] = d_i u_j
    b = np.zeros(u.grid.shape)
    for i in range(3):
        for m in range(3):
            acc = np.zeros(u.grid.shape)
            for j in range(3):
                acc += du[j][i] * du[m][j]
            b += acc * du[m][i]
    return b


def b_regrouped_pointwise(u: SpectralField, fs: FrameSample) -> np.ndarray:
    """B rewritten so every term carries a horizontal factor, trading
    d_beta u^beta for -grad_h . u^h via div u = 0.  Pointwise equal to
    ``b_pointwise`` up to roundoff."""
    dirs = (fs.tau, fs.nu, fs.beta)
    comps = [u.dot_constant(e) for e in dirs]
    # d[l][m] = d_l u^m on grid nodes, directions ordered (tau, nu, beta)
    d = [[to_physical(_deriv_along(comps[m], dirs[l])) for m in range(3)] for l in range(3)]
    div_h = -d[2][2]  # grad_h . u^h

    out = np.zeros(u.grid.shape)
    # both indices horizontal: already of the required form
    for l in range(2):
        for m in range(2):
            out += (d[l][0] * d[0][m] + d[l][1] * d[1][m] + d[l][2] * d[2][m]) * d[l][m]
    # l = m = beta: (d_beta u . grad u^beta) d_beta u^beta
    adv_b = d[2][0] * d[0][2] + d[2][1] * d[1][2] + d[2][2] * d[2][2]
    out += -adv_b * div_h
    # l = beta, m horizontal
    for m in range(2):
        out += (d[2][0] * d[0][m] + d[2][1] * d[1][m] - div_h * d[2][m]) * d[2][m]
    # m = beta, l horizontal
    for l in range(2):
        out += (d[l][0] * d[0][2] + d[l][1] * d[1][2] - d[l][2] * div_h) * d[l][2]
    return out


def b_integral(u: SpectralField) -> float:
    return float(b_pointwise(u).sum() * u.grid.dx**3)


@dataclass
class NodeDiagnostics:
    t: float
    integrand: float
    frame_deriv_sq: float
    f_value: float  # ||omega||^2 + ||d_beta u^beta||^2
    dfdt: float
    diss_omega: float
    diss_q: float
    omega_l2: float
    q_l2: float
    grad_u_sq: float
    r_omega: float = math.nan
    r_dbeta: float = math.nan
    r51: float = math.nan
    r56: float = math.nan
    r62: float = math.nan
    i_terms: tuple[float, float, float] = (math.nan,) * 3
    ii_terms: tuple[float, float, float] = (math.nan,) * 3


def compute_node(
    state: FlowState, fs: FrameSample, heavy: bool = True
) -> NodeDiagnostics:
    u = state.u
    dq = derived_quantities(u, fs)
    omega, q = dq.omega_beta, dq.dbeta_ubeta
    f_value = l2_norm(omega) ** 2 + l2_norm(q) ** 2

    ut = time_derivative(state)
    src_omega = _frame_source_omega(u, fs)
    src_q = _frame_source_q(u, fs)
    dt_omega = _curl_h(ut, fs) + src_omega
    dt_q = directional_derivative(ut.dot_constant(fs.beta), fs.beta) + src_q
    dfdt = 2.0 * l2_inner(omega, dt_omega) + 2.0 * l2_inner(q, dt_q)

    node = NodeDiagnostics(
        t=state.t,
        integrand=criterion_integrand(u, fs.beta),
        frame_deriv_sq=fs.derivative_sq(),
        f_value=f_value,
        dfdt=dfdt,
        diss_omega=state.nu_visc * sobolev_norm(omega, 1.0) ** 2,
        diss_q=state.nu_visc * sobolev_norm(q, 1.0) ** 2,
        omega_l2=l2_norm(omega),
        q_l2=l2_norm(q),
        grad_u_sq=sobolev_norm(u, 1.0) ** 2,
    )
    if heavy:
        ev = verify_evolution_system(state, fs)
        en = energy_identity_residuals(state, fs)
        node.r_omega, node.r_dbeta = ev.r_omega, ev.r_dbeta
        node.r51, node.r56, node.r62 = en.r51, en.r56, en.r62
        node.i_terms, node.ii_terms = en.i_terms, en.ii_terms
    return node


@dataclass
class CriterionLog:
    times: np.ndarray
    nodes: list[NodeDiagnostics]
    criterion_integral: np.ndarray  # running trapezoid of the integrand
    composite_integral: np.ndarray  # integrand + frame derivative square
    u0_l2: float

    def final_integral(self) -> float:
        return float(self.criterion_integral[-1])

    def write_csv(self, path) -> None:
        cols = [
            "t",
            "criterion_integrand",
            "criterion_integral",
            "frame_deriv_sq",
            "composite_integral",
            "F",
            "dFdt",
            "diss_omega",
            "diss_dbeta",
            "r43_omega",
            "r43_dbeta",
            "r51",
            "r56",
            "r62",
            "I1",
            "I2",
            "I3",
            "II1",
            "II2",
            "II3",
        ]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for i, nd in enumerate(self.nodes):
                w.writerow(
                    [
                        repr(float(x))
                        for x in (
                            nd.t,
                            nd.integrand,
                            self.criterion_integral[i],
                            nd.frame_deriv_sq,
                            self.composite_integral[i],
                            nd.f_value,
                            nd.dfdt,
                            nd.diss_omega,
                            nd.diss_q,
                            nd.r_omega,
                            nd.r_dbeta,
                            nd.r51,
                            nd.r56,
                            nd.r62,
                            *nd.i_terms,
                            *nd.ii_terms,
                        )
                    ]
                )


def _frame_sampler(frame):
    """Uniform access to constant samples, Frame objects, or callables."""
    if isinstance(frame, FrameSample):
        return lambda t: frame
    if isinstance(frame, Frame):
        derivs = frame_derivatives(frame)
        times = frame.times

        def at(t: float) -> FrameSample:
            i = int(np.searchsorted(times, t))
            if i >= len(times) or abs(times[i] - t) > 1e-12:
                warnings.warn(
                    "trajectory time not on the frame mesh; interpolating",
                    MeshMismatchWarning,
                    stacklevel=3,
                )
            return frame.at_time(min(max(t, times[0]), times[-1]), derivs)

        return at
    return frame  # assume callable t -> FrameSample


def accumulate(
    states: Iterable[FlowState], frame, residual_every: int = 1
) -> CriterionLog:
    """Full criterion log along a trajectory.

    ``frame`` may be a FrameSample (constant direction), a Frame (sampled
    path; interpolated with a warning when meshes differ), or a callable
    t -> FrameSample.  Heavy identity residuals are evaluated every
    ``residual_every`` nodes."""
    at = _frame_sampler(frame)
    nodes: list[NodeDiagnostics] = []
    u0_l2 = None
    for i, state in enumerate(states):
        if u0_l2 is None:
            u0_l2 = l2_norm(state.u)
        fs = at(state.t)
        nodes.append(compute_node(state, fs, heavy=(i % residual_every == 0)))
    times = np.array([nd.t for nd in nodes])
    integrand = np.array([nd.integrand for nd in nodes])
    frame_sq = np.array([nd.frame_deriv_sq for nd in nodes])
    crit = _running_trapezoid(times, integrand)
    comp = _running_trapezoid(times, integrand + frame_sq)
    return CriterionLog(
        times=times,
        nodes=nodes,
        criterion_integral=crit,
        composite_integral=comp,
        u0_l2=float(u0_l2),
    )


def _running_trapezoid(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y)
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


@dataclass
class Prop1Estimate:
    minimal_c: float
    per_term_c: dict
    sigma: float
    n_nodes: int
    degenerate: bool  # right side vanished while the left side was positive


def prop1_constant_estimate(
    log_or_nodes, sigma: float, u0_l2: float | None = None
) -> Prop1Estimate:
    """Smallest single constant C making the a-priori inequality hold at every
    node: dF/dt + dissipation <= C [F crit + ||u0||^2 |frame'|^2
    + (1/sigma) (||omega||^{2/(1-s)} + ||q||^{2/(1-s)}) crit^{(1-2s)/(1-s)}
    (grad u)^{s/(1-s)}]."""
    if not (0.0 < sigma <= 0.2):
        raise ValueError(f"sigma must lie in (0, 1/5], got {sigma}")
    if isinstance(log_or_nodes, CriterionLog):
        nodes = log_or_nodes.nodes
        u0_l2 = log_or_nodes.u0_l2 if u0_l2 is None else u0_l2
    else:
        nodes = list(log_or_nodes)
        if u0_l2 is None:
            raise ValueError("u0_l2 required when passing bare node lists")

    s = sigma
    minimal_c = 0.0
    per_term = {"criterion": 0.0, "frame": 0.0, "interpolation": 0.0}
    degenerate = False
    for nd in nodes:
        lhs = nd.dfdt + nd.diss_omega + nd.diss_q
        if lhs <= 0:
            continue
        r1 = nd.f_value * nd.integrand
        r2 = u0_l2**2 * nd.frame_deriv_sq
        r3 = (
            (nd.omega_l2 ** (2.0 / (1.0 - s)) + nd.q_l2 ** (2.0 / (1.0 - s)))
            * nd.integrand ** ((1.0 - 2.0 * s) / (1.0 - s))
            * nd.grad_u_sq ** (s / (1.0 - s))
            / s
        )
        rhs = r1 + r2 + r3
        if rhs <= _EPS:
            degenerate = True
            continue
        minimal_c = max(minimal_c, lhs / rhs)
        for key, r in (("criterion", r1), ("frame", r2), ("interpolation", r3)):
            if r > _EPS:
                per_term[key] = max(per_term[key], lhs / r)
    return Prop1Estimate(
        minimal_c=minimal_c,
        per_term_c=per_term,
        sigma=sigma,
        n_nodes=len(nodes),
        degenerate=degenerate,
    )
