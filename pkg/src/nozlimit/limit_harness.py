"""Stiff-gas sweep harness: framework-condition checks, weak residuals,
Lq-norm law, div-curl commutation defects, wall traces, and rate fits.

All subdomain integrals run over a fixed "core" strip |xi| <= fraction * L
strictly inside the truncation; axisymmetric quantities use the plain
(x, r)-plane measure, with the physical r-weight kept inside the flux fields
themselves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import core, nozzle_solver as ns
from .errors import InputError, ResolutionError

# integral of (1 - t^2)^6 over [-1, 1]
_BUMP_SQ_INT = 2048.0 / 3003.0
# integral of (1 - t^2)^3 over [-1, 1]
_BUMP_INT = 32.0 / 35.0


def core_mask(grid, fraction=0.5):
    """Cells of the core strip |xi| <= fraction * L."""
    if not 0.0 < fraction <= 1.0:
        raise InputError(f"core fraction must lie in (0, 1], got {fraction}")
    keep = np.abs(grid.xi_c) <= fraction * grid.L + 1e-12
    return np.broadcast_to(keep, (grid.n_eta, grid.n_xi)).copy()


# ----------------------------------------------------------------------
# test-function family
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class BumpFunction:
    """Unit-L2 tensor-product bump (1-t^2)^3 at a center with two scales."""

    center: tuple
    scale: tuple

    @property
    def _norm(self):
        s1, s2 = self.scale
        return 1.0 / np.sqrt(_BUMP_SQ_INT * _BUMP_SQ_INT * s1 * s2)

    def value(self, x1, x2):
        t1 = (x1 - self.center[0]) / self.scale[0]
        t2 = (x2 - self.center[1]) / self.scale[1]
        b1 = np.where(np.abs(t1) < 1.0, (1.0 - t1 * t1) ** 3, 0.0)
        b2 = np.where(np.abs(t2) < 1.0, (1.0 - t2 * t2) ** 3, 0.0)
        return self._norm * b1 * b2

    def grad(self, x1, x2):
        s1, s2 = self.scale
        t1 = (x1 - self.center[0]) / s1
        t2 = (x2 - self.center[1]) / s2
        in1 = np.abs(t1) < 1.0
        in2 = np.abs(t2) < 1.0
        b1 = np.where(in1, (1.0 - t1 * t1) ** 3, 0.0)
        b2 = np.where(in2, (1.0 - t2 * t2) ** 3, 0.0)
        db1 = np.where(in1, -6.0 * t1 * (1.0 - t1 * t1) ** 2 / s1, 0.0)
        db2 = np.where(in2, -6.0 * t2 * (1.0 - t2 * t2) ** 2 / s2, 0.0)
        return self._norm * db1 * b2, self._norm * b1 * db2


@dataclass(frozen=True)
class TestFunctionFamily:
    """Deterministic family of compactly supported bumps inside the core."""

    bumps: tuple
    core_fraction: float

    @classmethod
    def build(cls, grid, core_fraction=0.5, n_centers=4, scales=(0.45, 0.3, 0.18)):
        """3 scales x n_centers bumps on the channel midline, supports kept
        strictly inside the core strip and away from the walls."""
        xi_half = core_fraction * grid.L
        margin = 0.05 * xi_half
        centers_x1 = np.linspace(-xi_half * 0.72, xi_half * 0.72, n_centers)
        bumps = []
        for c1 in centers_x1:
            lo, _, _ = grid.geometry.lower(c1)
            w, _, _ = grid.geometry.width(c1)
            mid = float(lo + 0.5 * w)
            for s in scales:
                s1 = min(s * xi_half, xi_half - abs(c1) - margin)
                # keep the x2 support off the walls over the whole x1 support
                xs = np.linspace(c1 - s1, c1 + s1, 33)
                lo_s, _, _ = grid.geometry.lower(xs)
                w_s, _, _ = grid.geometry.width(xs)
                gap = float(np.min(np.minimum(mid - lo_s, lo_s + w_s - mid)))
                s2 = min(s * w, 0.9 * gap)
                if s1 <= 0.0 or s2 <= 0.0:
                    raise InputError("test-function support does not fit the core strip")
                bumps.append(BumpFunction(center=(float(c1), mid), scale=(float(s1), float(s2))))
        return cls(bumps=tuple(bumps), core_fraction=float(core_fraction))

    def describe(self):
        return [{"center": list(b.center), "scale": list(b.scale)} for b in self.bumps]


# ----------------------------------------------------------------------
# weak residuals
# ----------------------------------------------------------------------

def _check_family_on_grid(family, grid):
    for b in family.bumps:
        if b.center[0] - b.scale[0] < -grid.L or b.center[0] + b.scale[0] > grid.L:
            raise InputError("test-function support escapes the grid in x1")
        xs = np.linspace(b.center[0] - b.scale[0], b.center[0] + b.scale[0], 9)
        lo = grid.geometry.lower(xs)[0]
        w = grid.geometry.width(xs)[0]
        if np.any(b.center[1] - b.scale[1] < lo) or np.any(b.center[1] + b.scale[1] > lo + w):
            raise InputError("test-function support escapes the grid in x2")


def weak_residual(fluxes, family, grid, source=None):
    """max over the family of |sum_cells phi * div_h(F) - sum phi * source|.

    ``fluxes`` is a list of (F1, F2) cell-field pairs (one entry per
    equation); the returned value is the max over equations and test
    functions.  The divergence uses geometric face fluxes, so constant
    fields have exactly zero residual.
    """
    if not isinstance(fluxes, (list, tuple)):
        raise InputError("fluxes must be a list of (F1, F2) pairs")
    _check_family_on_grid(family, grid)
    worst = 0.0
    for entry in fluxes:
        if len(entry) == 3:
            F1, F2, src = entry
        else:
            F1, F2 = entry
            src = source
        fx, fe = grid.face_normal_fluxes(F1, F2)
        net = (fx[:, 1:] - fx[:, :-1]) + (fe[1:, :] - fe[:-1, :])
        for bump in family.bumps:
            phi = bump.value(grid.x1_c, grid.x2_c)
            val = float(np.sum(phi * net))
            if src is not None:
                val -= float(np.sum(phi * src * grid.cell_measure))
            worst = max(worst, abs(val))
    return worst


def _face_pairing(flux_xi, flux_eta, phi):
    """sum_cells phi * (net outward face flux), written as a face sum."""
    acc = float(np.sum(flux_xi[:, 1:-1] * (phi[:, :-1] - phi[:, 1:])))
    acc += float(np.sum(flux_eta[1:-1, :] * (phi[:-1, :] - phi[1:, :])))
    return acc


def incompressibility_functional(solution, family):
    """max over the family of the weighted-velocity divergence pairing.

    The pairing contracts the exactly conservative stream-function face
    fluxes of a*u against test-function differences, so it vanishes to
    round-off for every solver state.
    """
    st = solution.state
    if st.face_aflux_xi is None:
        raise InputError("solution carries no conservative face fluxes")
    grid = solution.grid
    worst = 0.0
    for bump in family.bumps:
        phi = bump.value(grid.x1_c, grid.x2_c)
        worst = max(worst, abs(_face_pairing(st.face_aflux_xi, st.face_aflux_eta, phi)))
    return worst


def divu_residual(solution, family):
    """Face-form residual of div u = 0 (the distinguishing limit equation).

    Divides the conservative a*u face fluxes by the face transport
    coefficient, so the structural part cancels and the value scales with
    the deviation of a from its limit.
    """
    st = solution.state
    grid = solution.grid
    a = ns._transport_coefficient(st, solution.far, solution.gas)
    a_xi = grid.interp_to_xi_faces(a)
    a_eta = grid.interp_to_eta_faces(a)
    if grid.axisymmetric:
        # keep the r-weight: the limit system is div(r u) in the (x, r) plane
        r_xi = np.empty_like(a_xi)
        r_xi[:, 1:-1] = 0.5 * (grid.r_c[:, :-1] + grid.r_c[:, 1:])
        r_xi[:, 0] = grid.r_c[:, 0]
        r_xi[:, -1] = grid.r_c[:, -1]
        r_eta = grid.interp_to_eta_faces(grid.r_c)
        u_xi = st.face_aflux_xi / a_xi * r_xi
        u_eta = st.face_aflux_eta / a_eta * r_eta
    else:
        u_xi = st.face_aflux_xi / a_xi
        u_eta = st.face_aflux_eta / a_eta
    worst = 0.0
    for bump in family.bumps:
        phi = bump.value(grid.x1_c, grid.x2_c)
        worst = max(worst, abs(_face_pairing(u_xi, u_eta, phi)))
    return worst


def system_fluxes(solution, which):
    """Flux pairs (plus optional source) for the conservation systems.

    ``which``: "compressible" (the solved system), "limit_inhomogeneous"
    (variable-density incompressible), "limit_homogeneous" (unit density).
    Axisymmetric systems carry the r-weight inside the fluxes; the radial
    momentum row then has the static source term p.
    """
    st = solution.state
    grid = solution.grid
    rho, u1, u2, p = st.rho, st.u1, st.u2, st.p
    gas = solution.gas
    if grid.axisymmetric:
        r = grid.r_c
        if which == "compressible":
            return [
                (r * rho * u1, r * rho * u2),
                (r * (rho * u1 * u1 + p), r * rho * u1 * u2),
                (r * rho * u1 * u2, r * (rho * u2 * u2 + p), p),
            ]
        if which == "limit_inhomogeneous":
            return [
                (r * rho * u1, r * rho * u2),
                (r * (rho * u1 * u1 + p), r * rho * u1 * u2),
                (r * rho * u1 * u2, r * (rho * u2 * u2 + p), p),
            ]
        if which == "limit_homogeneous":
            return [
                (r * (u1 * u1 + p), r * u1 * u2),
                (r * u1 * u2, r * (u2 * u2 + p), p),
            ]
        raise InputError(f"unknown system {which!r}")
    if which == "compressible":
        rows = [
            (rho * u1, rho * u2),
            (rho * u1 * u1 + p, rho * u1 * u2),
            (rho * u1 * u2, rho * u2 * u2 + p),
        ]
        if gas is not None and not gas.homentropic:
            E = core.total_energy(st, gas)
            rows.append((rho * u1 * E + u1 * p, rho * u2 * E + u2 * p))
        return rows
    if which == "limit_inhomogeneous":
        return [
            (rho * u1, rho * u2),
            (rho * u1 * u1 + p, rho * u1 * u2),
            (rho * u1 * u2, rho * u2 * u2 + p),
        ]
    if which == "limit_homogeneous":
        return [
            (u1 * u1 + p, u1 * u2),
            (u1 * u2, u2 * u2 + p),
        ]
    raise InputError(f"unknown system {which!r}")


# ----------------------------------------------------------------------
# Lq law and framework conditions
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LqLawResult:
    q: float
    norm: float
    gap: float
    chain_lower: float
    chain_upper: float
    chain_ok: bool


def lq_norm_law(p_field, gamma, q, grid, mask=None, rel_tol=1e-12):
    """Lq norm of p^(1/gamma) over the core and the Jensen/Hoelder chain.

    Returns the gap | ||p^(1/g)||_q - |core|^(1/q) | and checks
    |core|^(1/q) exp{ (1/(g|core|)) int ln p } <= ||p^(1/g)||_q
    <= (int p)^(1/g) |core|^(1/q - 1/g), all with the same cell quadrature.
    """
    if q < 1.0:
        raise InputError(f"q must be >= 1, got {q}")
    p = np.asarray(p_field, dtype=float)
    if np.any(p <= 0.0):
        raise InputError("pressure must be positive for the Lq law")
    w = grid.cell_measure if mask is None else grid.cell_measure * mask
    vol = float(np.sum(w))
    g = float(gamma)
    int_pq = float(np.sum(w * np.power(p, q / g)))
    norm = int_pq ** (1.0 / q)
    gap = abs(norm - vol ** (1.0 / q))
    int_lnp = float(np.sum(w * np.log(p)))
    lower = vol ** (1.0 / q) * np.exp(int_lnp / (g * vol))
    upper = float(np.sum(w * p)) ** (1.0 / g) * vol ** (1.0 / q - 1.0 / g)
    ok = (lower <= norm * (1.0 + rel_tol)) and (norm <= upper * (1.0 + rel_tol))
    return LqLawResult(q=q, norm=norm, gap=gap, chain_lower=lower,
                       chain_upper=upper, chain_ok=bool(ok))


@dataclass
class ConditionReport:
    """Per-sweep verdicts for the uniform-bound conditions."""

    gammas: list
    mach_bar: float
    sup_mach: list
    a1_pass: bool
    l1_speed_sq: list
    l1_pressure: list
    a2_finite: bool
    tv_vorticity: list
    a3_ratio: float
    log_energy_over_gamma: list
    log_pressure_over_gamma: list
    h_first_to_last: float
    f1_first_to_last: float
    entropy_cauchy_l1: list
    sandwich_lower_margin: list
    sandwich_upper_margin: list
    sandwich_pass: bool
    jensen_pass: bool


def check_framework_conditions(solutions, mach_bar=1.0, core_fraction=0.5,
                               q_list=(1.0, 2.0)):
    """Evaluate the uniform-bound conditions on a gamma-indexed solution set."""
    if len(solutions) < 2:
        raise InputError("need at least 2 gamma values to check the sweep conditions")
    gammas = sorted(solutions)
    first = solutions[gammas[0]]
    grid = first.grid
    mask = core_mask(grid, core_fraction)
    w = grid.cell_measure * mask

    sup_mach, l1u2, l1p, tv = [], [], [], []
    lnE, lnp = [], []
    s_fields = []
    sand_lo, sand_hi = [], []
    jensen_ok = True
    for gval in gammas:
        sol = solutions[gval]
        st = sol.state
        if st.p is None:
            raise InputError("framework conditions need a pressure field")
        g = sol.gas.gamma
        sup_mach.append(float(np.max(sol.derived.mach)))
        l1u2.append(float(np.sum(w * st.speed ** 2)))
        l1p.append(float(np.sum(w * st.p)))
        tv.append(float(np.sum(w * np.abs(sol.derived.vorticity))))
        e_frame = 0.5 * st.speed ** 2 + np.power(st.p, 1.0 - 1.0 / g) / (g - 1.0)
        lnE.append(float(np.sum(w * np.log(e_frame))) / g)
        lnp.append(float(np.sum(w * np.log(st.p))) / g)
        lo, hi = core.energy_sandwich_margins(st, sol.gas, mach_bar=mach_bar)
        sand_lo.append(lo)
        sand_hi.append(hi)
        s_fields.append(sol.derived.entropy)
        for q in q_list:
            if not lq_norm_law(st.p, g, q, grid, mask=mask).chain_ok:
                jensen_ok = False
    f2 = [float(np.sum(w * np.abs(s_fields[i + 1] - s_fields[i])))
          for i in range(len(s_fields) - 1)]
    tv_pos = [t for t in tv if t > 0.0]
    a3_ratio = (max(tv_pos) / min(tv_pos)) if tv_pos else 1.0
    h_ratio = abs(lnE[0]) / max(abs(lnE[-1]), 1e-300)
    f1_ratio = abs(lnp[0]) / max(abs(lnp[-1]), 1e-300)
    return ConditionReport(
        gammas=[float(g) for g in gammas], mach_bar=float(mach_bar),
        sup_mach=sup_mach, a1_pass=bool(max(sup_mach) <= mach_bar * (1.0 + 1e-12)),
        l1_speed_sq=l1u2, l1_pressure=l1p,
        a2_finite=bool(np.all(np.isfinite(l1u2)) and np.all(np.isfinite(l1p))),
        tv_vorticity=tv, a3_ratio=float(a3_ratio),
        log_energy_over_gamma=lnE, log_pressure_over_gamma=lnp,
        h_first_to_last=float(h_ratio), f1_first_to_last=float(f1_ratio),
        entropy_cauchy_l1=f2,
        sandwich_lower_margin=sand_lo, sandwich_upper_margin=sand_hi,
        sandwich_pass=bool(min(sand_lo) >= -1e-12 and min(sand_hi) >= -1e-12),
        jensen_pass=bool(jensen_ok),
    )


# ----------------------------------------------------------------------
# div-curl commutation diagnostic
# ----------------------------------------------------------------------

def divcurl_diagnostic(n_list, n_cells=1024, bump_scale=0.7, span=1.0):
    """Commutation defects for oscillatory pairs on a 1D axis.

    For each frequency n: the compliant pair u = (0, sin(n x)) (div-free),
    w = (sin(n x), 0) (curl-free) and the violating pair u = w =
    (sin(n x), 0).  The defect compares the pairing of the product against a
    fixed bump with the product of the individual pairings; the violating
    pair's analytic defect tends to (1/2) * int(phi).
    """
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise InputError("need at least one frequency")
    h = 2.0 * span / n_cells
    for n in n_list:
        if 2.0 * np.pi / (n * h) < 8.0:
            raise ResolutionError(
                f"frequency n={n} has fewer than 8 cells per oscillation "
                f"on {n_cells} cells")
    x = -span + h * (np.arange(n_cells) + 0.5)
    t = x / bump_scale
    phi = np.where(np.abs(t) < 1.0, (1.0 - t * t) ** 3, 0.0)
    int_phi = float(np.sum(phi) * h)
    analytic = 0.5 * _BUMP_INT * bump_scale
    compliant, violating = [], []
    for n in n_list:
        s = np.sin(n * x)
        pair_s = float(np.sum(phi * s) * h)
        # compliant: u.w = 0 identically; <u>.<w> = (0, I).(I, 0) = 0
        compliant.append(abs(0.0 - (0.0 * pair_s + pair_s * 0.0)))
        prod = float(np.sum(phi * s * s) * h)
        violating.append(abs(prod - pair_s * pair_s))
    return {"n": n_list, "compliant": compliant, "violating": violating,
            "int_phi": int_phi, "analytic_violating": analytic}


# ----------------------------------------------------------------------
# wall trace
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class NormalTraceResult:
    value: float
    wall_flux_linf: float
    gauss_green: float


def normal_trace(state, grid, n_bands=3):
    """Wall normal trace of the velocity field.

    Reports the direct L-inf of the wall-face normal velocity (adjacent-cell
    sampling) together with smooth band-weighted Gauss-Green functionals
    along each wall; the returned value is the max of the two.
    """
    _, fe = grid.face_normal_fluxes(state.u1, state.u2)
    # physical face length of eta faces; the axis row of an axisymmetric grid
    # is a symmetry line, not a wall, so only the outer wall is traced there
    slope = grid._dlo_c + grid.eta_f[:, None] * grid._dw_c
    meas = np.sqrt(1.0 + slope ** 2) * grid.hxi
    linf = 0.0
    gg = 0.0
    centers = np.linspace(-0.5 * grid.L, 0.5 * grid.L, n_bands)
    s = 0.35 * grid.L
    for jf in ([grid.n_eta] if grid.axisymmetric else [0, grid.n_eta]):
        flux = fe[jf, :]
        m = meas[jf, :]
        linf = max(linf, float(np.max(np.abs(flux / m))))
        for c in centers:
            tt = (grid.xi_c - c) / s
            band = np.where(np.abs(tt) < 1.0, (1.0 - tt * tt) ** 3, 0.0)
            denom = float(np.sum(band * m))
            if denom > 0.0:
                gg = max(gg, abs(float(np.sum(band * flux))) / denom)
    return NormalTraceResult(value=max(linf, gg), wall_flux_linf=linf, gauss_green=gg)


# ----------------------------------------------------------------------
# rate fits and the sweep driver
# ----------------------------------------------------------------------

def convergence_rate(gammas, values):
    """Least-squares slope of log(value) against log(1/gamma)."""
    g = np.asarray(gammas, dtype=float)
    v = np.asarray(values, dtype=float)
    if g.size < 3:
        raise InputError("need at least 3 samples to fit a rate")
    if np.any(v < 0.0):
        raise InputError("metric values must be nonnegative for a log-log fit")
    if np.any(v == 0.0):
        # an exactly-zero series is flat
        if np.all(v == 0.0):
            return 0.0
        raise InputError("metric hit exact zero; no log-log rate")
    x = np.log(1.0 / g)
    y = np.log(v)
    slope = float(np.polyfit(x, y, 1)[0])
    return slope


METRIC_COLUMNS = [
    "gamma", "density_dev_l1", "density_dev_linf", "lq_gap_q1", "lq_gap_q2",
    "res_mass", "res_mom1", "res_mom2", "res_energy",
    "res_limit_divu", "res_limit_mom",
    "incompressibility", "normal_trace", "dist_to_reference",
    "sup_mach", "tv_vorticity",
    "log_energy_over_gamma", "log_pressure_over_gamma",
    "entropy_cauchy_l1", "rho_minus_entropy_l1",
    "sandwich_lower_margin", "sandwich_upper_margin", "jensen_ok",
    "picard_iterations", "final_update",
]

RATE_METRICS = ["density_dev_l1", "density_dev_linf", "lq_gap_q1", "lq_gap_q2",
                "rho_minus_entropy_l1", "res_limit_divu", "dist_to_reference"]


@dataclass
class SweepReport:
    problem: str
    gammas: list
    metrics: dict               # column -> list (aligned with gammas)
    rates: dict                 # metric -> fitted slope vs 1/gamma
    conditions: ConditionReport | None
    family: list
    core_fraction: float
    incomplete: bool = False
    failures: dict = field(default_factory=dict)

    def column(self, name):
        return self.metrics[name]


def gamma_sweep(problem, gammas, m, upstream, geometry, grid, config=None,
                core_fraction=0.5, mach_bar=1.0, q_list=(1.0, 2.0),
                family=None, reference=True, threads=1):
    """Solve per gamma, collect limit metrics, fit rates.

    ``problem`` is "full2d" or "axisym".  Homentropic sweeps also solve the
    frozen unit-density reference on the same grid and report the L2(core)
    velocity distance to it.
    """
    gammas = [float(g) for g in gammas]
    if sorted(gammas) != gammas or len(set(gammas)) != len(gammas):
        raise InputError("gamma list must be strictly increasing")
    if len(gammas) < 2:
        raise InputError("sweep needs at least 2 gamma values")
    config = config or ns.PicardConfig()
    if family is None:
        family = TestFunctionFamily.build(grid, core_fraction=core_fraction)
    mask = core_mask(grid, core_fraction)
    w = grid.cell_measure * mask

    solver = {"full2d": ns.solve_problem1, "axisym": ns.solve_problem2}[problem]

    def run_one(g):
        return solver(m, g, upstream, geometry, grid, config=config)

    solutions = {}
    failures = {}
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {g: pool.submit(run_one, g) for g in gammas}
        for g in gammas:
            try:
                solutions[g] = futs[g].result()
            except Exception as exc:           # noqa: BLE001 - reported downstream
                failures[g] = str(exc)
    else:
        for g in gammas:
            try:
                solutions[g] = run_one(g)
            except Exception as exc:           # noqa: BLE001
                failures[g] = str(exc)

    ref = None
    if reference and problem == "axisym" and not failures:
        ref = ns.solve_incompressible_reference(m, upstream, geometry, grid,
                                                config=config)

    cols = {name: [] for name in METRIC_COLUMNS}
    solved = {g: s for g, s in solutions.items()}
    prev_entropy = None
    for g in gammas:
        cols["gamma"].append(g)
        if g not in solved:
            for name in METRIC_COLUMNS[1:]:
                cols[name].append(float("nan"))
            continue
        sol = solved[g]
        st = sol.state
        rho_g = np.power(st.p, 1.0 / g)
        dev = np.abs(rho_g - 1.0)
        cols["density_dev_l1"].append(float(np.sum(w * dev)))
        cols["density_dev_linf"].append(float(np.max(dev[mask])))
        lq1 = lq_norm_law(st.p, g, q_list[0], grid, mask=mask)
        lq2 = lq_norm_law(st.p, g, q_list[1], grid, mask=mask)
        cols["lq_gap_q1"].append(lq1.gap)
        cols["lq_gap_q2"].append(lq2.gap)
        comp = system_fluxes(sol, "compressible")
        comp_res = [weak_residual([row], family, grid) for row in comp]
        cols["res_mass"].append(comp_res[0])
        cols["res_mom1"].append(comp_res[1])
        cols["res_mom2"].append(comp_res[2])
        cols["res_energy"].append(comp_res[3] if len(comp_res) > 3 else float("nan"))
        cols["res_limit_divu"].append(divu_residual(sol, family))
        limit_kind = ("limit_homogeneous" if sol.gas.homentropic
                      else "limit_inhomogeneous")
        mom_rows = system_fluxes(sol, limit_kind)
        if sol.gas.homentropic:
            cols["res_limit_mom"].append(
                max(weak_residual([row], family, grid) for row in mom_rows))
        else:
            cols["res_limit_mom"].append(
                max(weak_residual([row], family, grid) for row in mom_rows[1:]))
        cols["incompressibility"].append(incompressibility_functional(sol, family))
        cols["normal_trace"].append(normal_trace(st, grid).value)
        if ref is not None:
            du = (st.u1 - ref.state.u1) ** 2 + (st.u2 - ref.state.u2) ** 2
            cols["dist_to_reference"].append(float(np.sqrt(np.sum(w * du))))
        else:
            cols["dist_to_reference"].append(float("nan"))
        cols["sup_mach"].append(float(np.max(sol.derived.mach)))
        cols["tv_vorticity"].append(float(np.sum(w * np.abs(sol.derived.vorticity))))
        e_frame = 0.5 * st.speed ** 2 + np.power(st.p, 1.0 - 1.0 / g) / (g - 1.0)
        cols["log_energy_over_gamma"].append(float(np.sum(w * np.log(e_frame))) / g)
        cols["log_pressure_over_gamma"].append(float(np.sum(w * np.log(st.p))) / g)
        ent = sol.derived.entropy
        if prev_entropy is None:
            cols["entropy_cauchy_l1"].append(float("nan"))
        else:
            cols["entropy_cauchy_l1"].append(float(np.sum(w * np.abs(ent - prev_entropy))))
        prev_entropy = ent
        cols["rho_minus_entropy_l1"].append(float(np.sum(w * np.abs(st.rho - ent))))
        lo, hi = core.energy_sandwich_margins(st, sol.gas, mach_bar=mach_bar)
        cols["sandwich_lower_margin"].append(lo)
        cols["sandwich_upper_margin"].append(hi)
        cols["jensen_ok"].append(float(lq1.chain_ok and lq2.chain_ok))
        cols["picard_iterations"].append(float(sol.diagnostics["iterations"]))
        cols["final_update"].append(sol.diagnostics["final_update"])

    rates = {}
    for name in RATE_METRICS:
        vals = [v for v in cols[name] if np.isfinite(v)]
        if len(vals) >= 3 and all(v > 0.0 for v in vals):
            gs = [g for g, v in zip(cols["gamma"], cols[name]) if np.isfinite(v)]
            rates[name] = convergence_rate(gs, vals)

    conditions = None
    if not failures and len(solved) >= 2:
        conditions = check_framework_conditions(solved, mach_bar=mach_bar,
                                                core_fraction=core_fraction,
                                                q_list=q_list)
    return SweepReport(problem=problem, gammas=gammas, metrics=cols, rates=rates,
                       conditions=conditions, family=family.describe(),
                       core_fraction=core_fraction,
                       incomplete=bool(failures), failures=failures)
