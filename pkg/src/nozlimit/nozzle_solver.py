"""Picard iteration for subsonic nozzle flow in stream-function form.

Each outer step freezes the transport coefficient a (p^(1/g), rho, or r rho)
and the vorticity source at the current stream function, solves the linear
divergence-form problem -div(grad psi / a) = omega, and relaxes.  The same
machinery runs the planar full Euler problem, the axisymmetric homentropic
problem, and the frozen unit-density closure used as the stiff-gas reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import core, elliptic, far_field as ff, geometry as geo
from .errors import ChokedFlowError, PicardBreakdownError, SolverStateError

_LABEL_GUARD = 1e-6


@dataclass
class PicardConfig:
    theta: float = 0.7
    max_outer: int = 200
    tol_outer: float = 1e-8
    tol_linear: float = 1e-11
    max_linear_iter: int = 30000
    dc_max: int = 60
    max_theta_halvings: int = 5

    def validate(self):
        if not 0.0 < self.theta <= 1.0:
            raise SolverStateError(f"relaxation theta must lie in (0, 1], got {self.theta}")
        if self.max_outer < 1:
            raise SolverStateError("max_outer must be >= 1")


@dataclass
class StreamSolution:
    psi: np.ndarray
    state: core.FlowState
    derived: core.DerivedFields
    far: ff.FarFieldState
    gas: core.GasModel | None
    m: float
    grid: geo.MappedGrid
    upstream: ff.UpstreamProfiles
    history: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    labels: np.ndarray | None = None

    @property
    def converged(self):
        return bool(self.diagnostics.get("converged", False))


class _Setup:
    """Problem data shared by the Picard steps."""

    def __init__(self, kind, grid, gas, upstream, far, m):
        self.kind = kind                     # full2d | axisym | incompressible
        self.grid = grid
        self.gas = gas
        self.upstream = upstream
        self.far = far
        self.m = float(m)
        self.psi_top = far.psi_total
        eta = grid.eta_c
        self.bc_west = far.psi(eta)
        self.bc_west_corner = far.psi(grid.eta_f)
        self.bc_south = np.zeros(grid.n_xi)
        self.bc_north = np.full(grid.n_xi, self.psi_top)


def streamline_pullback(psi, far, guard=_LABEL_GUARD):
    """Upstream labels (psi_-)^{-1}(psi), clamped to [0, 1].

    Values outside [-guard, 1 + guard] (relative to the stream-function
    range) indicate a corrupted solver state and raise.
    """
    psi = np.asarray(psi, dtype=float)
    top = far.psi_total
    lo, hi = float(psi.min()), float(psi.max())
    if lo < -guard * top or hi > (1.0 + guard) * top:
        raise SolverStateError(
            f"stream function left its admissible range: [{lo:.3e}, {hi:.3e}] "
            f"vs [0, {top:.3e}]")
    return far.label(psi)


def vorticity_field(state, labels, far, upstream, gas):
    """Model vorticity transported from the upstream data.

    omega = -(a(x) / psi_-'(lam)) * (B_-'(lam) + g/(g-1) p^((g-1)/g) S_-'/S_-^2),
    with a the local transport coefficient (p^(1/g), rho, or r rho) and
    psi_-' the derivative of the inlet stream-function profile at the label.
    The entropy term only exists for the full Euler closure.
    """
    lam = np.asarray(labels, dtype=float)
    a_full = _transport_coefficient(state, far, gas)
    psi_w = far.stream_weight(lam) * far.velocity(lam)
    term = upstream.db(lam)
    if gas is not None and not gas.homentropic:
        g = gas.gamma
        s = upstream.s(lam)
        term = term + g / (g - 1.0) * np.power(state.p, (g - 1.0) / g) \
            * upstream.ds(lam) / (s * s)
    return -a_full * term / np.maximum(psi_w, 1e-300)


def _transport_coefficient(state, far, gas):
    """a(x) with psi-gradient = a * rotated velocity."""
    grid = state.grid
    if gas is None:
        a = np.ones_like(state.rho)
    elif gas.homentropic:
        a = state.rho
    else:
        a = np.power(state.p, 1.0 / gas.gamma)
    if grid.axisymmetric:
        a = a * grid.r_c
    return a


def _closure(psi, setup):
    """Pointwise fields from the current stream function.

    Raises :class:`ChokedFlowError` when any cell has no subsonic root.
    """
    grid, gas, far, up = setup.grid, setup.gas, setup.far, setup.upstream
    lam = streamline_pullback(psi, far)
    dpsi_x1, dpsi_x2 = grid.grad(psi, south=setup.bc_south, north=setup.bc_north,
                                 west=setup.bc_west)
    grad2 = dpsi_x1 ** 2 + dpsi_x2 ** 2
    B = up.b(lam)
    if gas is None:
        rho = np.ones_like(psi)
        p = None
        a_smooth = np.ones_like(psi)
    elif gas.homentropic:
        phi2 = grad2 / (grid.r_c ** 2) if grid.axisymmetric else grad2
        rho = ff.subsonic_root_homentropic(phi2, B, gas.gamma)
        p = np.power(rho, gas.gamma)
        a_smooth = rho
    else:
        S = up.s(lam)
        p = ff.subsonic_root_full(grad2, B, S, gas.gamma)
        rho = S * np.power(p, 1.0 / gas.gamma)
        a_smooth = np.power(p, 1.0 / gas.gamma)
    a_full = a_smooth * grid.r_c if grid.axisymmetric else a_smooth
    u1 = dpsi_x2 / a_full
    u2 = -dpsi_x1 / a_full
    state = core.FlowState(rho=rho, u1=u1, u2=u2, p=p, grid=grid, psi=psi.copy())
    return state, lam, a_smooth


def picard_step(psi, setup, config, theta=None, return_info=False):
    """One frozen-coefficient step; returns (psi_new, FlowState at psi)."""
    th = config.theta if theta is None else float(theta)
    state, lam, a_smooth = _closure(psi, setup)
    omega = vorticity_field(state, lam, setup.far, setup.upstream, setup.gas)
    problem = elliptic.EllipticProblem(
        setup.grid, coeff=1.0 / a_smooth, source=omega,
        west=elliptic.Dirichlet(setup.bc_west), east=elliptic.Neumann(),
        south=elliptic.Dirichlet(0.0), north=elliptic.Dirichlet(setup.psi_top))
    psi_lin, info = elliptic.solve(problem, tol=config.tol_linear,
                                   max_iter=config.max_linear_iter,
                                   dc_max=config.dc_max, x0=psi, return_info=True)
    psi_new = psi if th == 0.0 else (1.0 - th) * psi + th * psi_lin
    if return_info:
        return psi_new, state, info
    return psi_new, state


def _initial_psi(setup):
    return np.broadcast_to(setup.bc_west[:, None],
                           (setup.grid.n_eta, setup.grid.n_xi)).copy()


def _iterate(setup, config):
    config.validate()
    grid = setup.grid
    psi = _initial_psi(setup)
    state, lam, a_smooth = _closure(psi, setup)
    history = []
    converged = False
    m_scale = setup.m
    for it in range(1, config.max_outer + 1):
        omega = vorticity_field(state, lam, setup.far, setup.upstream, setup.gas)
        problem = elliptic.EllipticProblem(
            grid, coeff=1.0 / a_smooth, source=omega,
            west=elliptic.Dirichlet(setup.bc_west), east=elliptic.Neumann(),
            south=elliptic.Dirichlet(0.0), north=elliptic.Dirichlet(setup.psi_top))
        psi_lin, lin_info = elliptic.solve(problem, tol=config.tol_linear,
                                           max_iter=config.max_linear_iter,
                                           dc_max=config.dc_max, x0=psi,
                                           return_info=True)
        th = config.theta
        accepted = False
        retries = 0
        for retries in range(config.max_theta_halvings + 1):
            cand = (1.0 - th) * psi + th * psi_lin
            try:
                cand_state, cand_lam, cand_a = _closure(cand, setup)
                accepted = True
                break
            except ChokedFlowError:
                th *= 0.5
        if not accepted:
            raise PicardBreakdownError(
                "subsonic closure choked even after relaxation halvings; "
                "reduce the mass flux m", history=history)
        update = float(np.max(np.abs(cand - psi))) / m_scale
        history.append({"iteration": it, "update": update, "theta": th,
                        "cg_iterations": lin_info["cg_iterations"],
                        "dc_passes": lin_info["dc_passes"],
                        "choke_retries": retries})
        psi, state, lam, a_smooth = cand, cand_state, cand_lam, cand_a
        if update <= config.tol_outer:
            converged = True
            break
    if not converged:
        raise PicardBreakdownError(
            f"Picard iteration did not reach update {config.tol_outer:.1e} * m "
            f"within {config.max_outer} iterations (last update "
            f"{history[-1]['update']:.3e} * m)", history=history)
    return psi, state, lam, history


def _conservative_fluxes(psi, setup, state):
    """Exactly conservative face fluxes of a*u (stream-function differences)."""
    grid = setup.grid
    corners = grid.corner_interp(psi, south=np.zeros(grid.n_xi + 1),
                                 north=np.full(grid.n_xi + 1, setup.psi_top),
                                 west=setup.bc_west_corner)
    # fix the west corner ends to the wall values (walls win over the inlet)
    corners[0, 0] = 0.0
    corners[-1, 0] = setup.psi_top
    aflux_xi = corners[1:, :] - corners[:-1, :]
    aflux_eta = corners[:, :-1] - corners[:, 1:]
    if setup.gas is not None and not setup.gas.homentropic:
        psi_mid_xi = 0.5 * (corners[1:, :] + corners[:-1, :])
        psi_mid_eta = 0.5 * (corners[:, :-1] + corners[:, 1:])
        s_xi = setup.upstream.s(setup.far.label(psi_mid_xi))
        s_eta = setup.upstream.s(setup.far.label(psi_mid_eta))
        mass_xi = s_xi * aflux_xi
        mass_eta = s_eta * aflux_eta
    else:
        mass_xi = aflux_xi.copy()
        mass_eta = aflux_eta.copy()
    state.face_aflux_xi = aflux_xi
    state.face_aflux_eta = aflux_eta
    state.face_mass_flux_xi = mass_xi
    state.face_mass_flux_eta = mass_eta


def _finalize(psi, setup, state, lam, history, config):
    grid = setup.grid
    _conservative_fluxes(psi, setup, state)
    omega = vorticity_field(state, lam, setup.far, setup.upstream, setup.gas)
    gas = setup.gas
    if gas is None:
        derived = core.DerivedFields(
            mach=np.zeros_like(psi), bernoulli=setup.upstream.b(lam),
            entropy=np.ones_like(psi),
            energy=0.5 * (state.u1 ** 2 + state.u2 ** 2), vorticity=omega)
        bounds = None
    else:
        derived = core.derived_fields(state, gas, vorticity=omega)
        bounds = core.apriori_bounds(gas.gamma, setup.upstream, gas)

    stations = np.arange(1, grid.n_xi)
    fluxes = np.array([geo.section_flux(state, grid, int(i)) for i in stations])
    flux_dev = float(np.max(np.abs(fluxes - setup.m)) / setup.m) if fluxes.size else 0.0
    wall_flux = max(float(np.max(np.abs(state.face_mass_flux_eta[0, :]))),
                    float(np.max(np.abs(state.face_mass_flux_eta[-1, :]))))
    psi_monotone = bool(np.all(np.diff(psi, axis=0) > -1e-12 * setup.far.psi_total))
    diagnostics = {
        "converged": True,
        "iterations": len(history),
        "final_update": history[-1]["update"] if history else 0.0,
        "flux_mean": float(np.mean(fluxes)) if fluxes.size else setup.m,
        "flux_max_rel_dev": flux_dev,
        "wall_normal_flux_max": wall_flux,
        "psi_monotone": psi_monotone,
    }
    if gas is not None:
        mach = derived.mach
        c = core.sonic_speed(state, gas)
        diagnostics.update({
            "max_mach": float(np.max(mach)),
            "min_sonic_margin": float(np.min(c * c - state.speed ** 2)),
            "speed_bound_ok": bool(np.max(state.speed) < bounds.speed_max),
            "pressure_bounds_ok": bool(np.min(state.p) > bounds.p_min
                                       and np.max(state.p) <= bounds.p_max * (1 + 1e-12)),
        })
    return StreamSolution(psi=psi, state=state, derived=derived, far=setup.far,
                          gas=gas, m=setup.m, grid=grid, upstream=setup.upstream,
                          history=history, diagnostics=diagnostics, labels=lam)


def solve_problem1(m, gamma, upstream, geometry, grid, config=None):
    """Planar full Euler nozzle flow at mass flux ``m`` and exponent ``gamma``."""
    if geometry.axisymmetric or grid.axisymmetric:
        raise SolverStateError("problem 1 runs on planar geometry")
    config = config or PicardConfig()
    gas = core.GasModel(core.GasKind.FULL_EULER, float(gamma))
    far = ff.far_field_full_euler(m, upstream, gamma)
    setup = _Setup("full2d", grid, gas, upstream, far, m)
    psi, state, lam, history = _iterate(setup, config)
    return _finalize(psi, setup, state, lam, history, config)


def solve_problem2(m, gamma, upstream, geometry, grid, config=None):
    """Axisymmetric homentropic nozzle flow (swirl-free, r-weighted operator)."""
    if not grid.axisymmetric:
        raise SolverStateError("problem 2 runs on axisymmetric grids")
    config = config or PicardConfig()
    gas = core.GasModel(core.GasKind.HOMENTROPIC, float(gamma))
    far = ff.far_field_axisym(m, upstream, gamma)
    setup = _Setup("axisym", grid, gas, upstream, far, m)
    psi, state, lam, history = _iterate(setup, config)
    return _finalize(psi, setup, state, lam, history, config)


def solve_incompressible_reference(m, upstream, geometry, grid, config=None):
    """Unit-density reference flow: the frozen gamma -> infinity closure."""
    config = config or PicardConfig()
    far = ff.far_field_incompressible(m, upstream, axisym=grid.axisymmetric)
    setup = _Setup("incompressible", grid, None, upstream, far, m)
    psi, state, lam, history = _iterate(setup, config)
    return _finalize(psi, setup, state, lam, history, config)
