"""Divergence-form elliptic solver -div(a grad psi) = g on mapped grids.

The assembled matrix keeps only the two-point (SPD) part of the mapped-metric
flux; cross-derivative terms and the second-order Dirichlet flux corrections
are applied as deferred corrections around the preconditioned CG solve, so
the matrix stays symmetric while the converged scheme is fully second order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numba import njit

from .errors import AssemblyError, LinearSolverError

_TINY = 1e-300


@dataclass(frozen=True)
class Dirichlet:
    """Dirichlet data at face midpoints (scalar or array along the side)."""

    values: object

    def resolve(self, n):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 0:
            return np.full(n, float(v))
        if v.shape != (n,):
            raise AssemblyError(f"Dirichlet data has shape {v.shape}, expected ({n},)")
        return v.copy()


@dataclass(frozen=True)
class Neumann:
    """Zero conormal flux."""


@dataclass
class EllipticProblem:
    """-div(coeff * grad psi) = source with per-side boundary conditions.

    ``coeff`` and ``source`` are cell arrays; on axisymmetric grids the
    operator carries the metric 1/r weight so ``coeff`` holds only the smooth
    part of the diffusion coefficient.
    """

    grid: object
    coeff: np.ndarray
    source: np.ndarray
    west: object
    east: object
    south: object
    north: object

    def sides(self):
        return {"west": self.west, "east": self.east,
                "south": self.south, "north": self.north}


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    shape: tuple
    apply_correction: object
    has_dirichlet: bool
    meta: dict = field(default_factory=dict)


def _harmonic(a, b):
    return 2.0 * a * b / (a + b)


def assemble(problem):
    """Assemble the SPD two-point system and the deferred-correction closure."""
    grid = problem.grid
    ne, nx = grid.n_eta, grid.n_xi
    hxi, heta = grid.hxi, grid.heta
    k = np.asarray(problem.coeff, dtype=float)
    if k.shape != (ne, nx):
        raise AssemblyError(f"coefficient shape {k.shape}, expected ({ne},{nx})")
    if np.any(k <= 0.0) or not np.all(np.isfinite(k)):
        bad = np.argwhere(~((k > 0.0) & np.isfinite(k)))[0]
        raise AssemblyError(f"nonpositive diffusion coefficient at cell {tuple(bad)}")
    src = np.asarray(problem.source, dtype=float)
    if src.shape != (ne, nx):
        raise AssemblyError(f"source shape {src.shape}, expected ({ne},{nx})")

    bcs = {}
    for name, bc in problem.sides().items():
        if isinstance(bc, Dirichlet):
            n = ne if name in ("west", "east") else nx
            bcs[name] = bc.resolve(n)
        elif isinstance(bc, Neumann):
            bcs[name] = None
        else:
            raise AssemblyError(f"side {name}: unsupported boundary spec {bc!r}")
    has_dirichlet = any(v is not None for v in bcs.values())

    idx = np.arange(ne * nx).reshape(ne, nx)
    diag = np.zeros((ne, nx))
    rhs = src * grid.cell_measure

    rows, cols, vals = [], [], []

    # interior xi faces (harmonic coefficient, two-point part)
    kh_xi = _harmonic(k[:, :-1], k[:, 1:])
    t_xi = kh_xi * grid.m_xx[:, 1:-1] * heta / hxi
    rows.append(idx[:, :-1].ravel()); cols.append(idx[:, 1:].ravel()); vals.append(-t_xi.ravel())
    rows.append(idx[:, 1:].ravel()); cols.append(idx[:, :-1].ravel()); vals.append(-t_xi.ravel())
    diag[:, :-1] += t_xi
    diag[:, 1:] += t_xi

    # interior eta faces
    kh_eta = _harmonic(k[:-1, :], k[1:, :])
    t_eta = kh_eta * grid.m_yy[1:-1, :] * hxi / heta
    rows.append(idx[:-1, :].ravel()); cols.append(idx[1:, :].ravel()); vals.append(-t_eta.ravel())
    rows.append(idx[1:, :].ravel()); cols.append(idx[:-1, :].ravel()); vals.append(-t_eta.ravel())
    diag[:-1, :] += t_eta
    diag[1:, :] += t_eta

    # Dirichlet boundary faces: half-cell two-point transmissibility
    t_bc = {}
    if bcs["west"] is not None:
        t = k[:, 0] * grid.m_xx[:, 0] * heta / (0.5 * hxi)
        diag[:, 0] += t
        rhs[:, 0] += t * bcs["west"]
        t_bc["west"] = t
    if bcs["east"] is not None:
        t = k[:, -1] * grid.m_xx[:, -1] * heta / (0.5 * hxi)
        diag[:, -1] += t
        rhs[:, -1] += t * bcs["east"]
        t_bc["east"] = t
    if bcs["south"] is not None:
        if grid.axisymmetric:
            t = k[0, :] * grid.axis_transmissibility * hxi
        else:
            t = k[0, :] * grid.m_yy[0, :] * hxi / (0.5 * heta)
        diag[0, :] += t
        rhs[0, :] += t * bcs["south"]
        t_bc["south"] = t
    if bcs["north"] is not None:
        t = k[-1, :] * grid.m_yy[-1, :] * hxi / (0.5 * heta)
        diag[-1, :] += t
        rhs[-1, :] += t * bcs["north"]
        t_bc["north"] = t

    rows.append(idx.ravel()); cols.append(idx.ravel()); vals.append(diag.ravel())
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(ne * nx, ne * nx))
    A.sum_duplicates()

    # face coefficients for the deferred cross terms
    k_xi_face = np.empty((ne, nx + 1))
    k_xi_face[:, 1:-1] = kh_xi
    k_xi_face[:, 0] = k[:, 0]
    k_xi_face[:, -1] = k[:, -1]
    k_eta_face = np.empty((ne + 1, nx))
    k_eta_face[1:-1, :] = kh_eta
    k_eta_face[0, :] = k[0, :]
    k_eta_face[-1, :] = k[-1, :]

    def apply_correction(psi):
        """Deferred fluxes (cross metric terms + quadratic Dirichlet flux).

        Returns the RHS addition so that A psi = rhs + correction(psi) is the
        full second-order discretization.
        """
        psi = psi.reshape(ne, nx)
        corr = np.zeros((ne, nx))

        # tangential derivatives at cell centers (Dirichlet-aware at walls)
        deta_c = grid._d_eta(psi, south=bcs["south"], north=bcs["north"])
        dxi_c = grid._d_xi(psi, west=bcs["west"], east=bcs["east"])

        # cross flux through interior xi faces: -k m_xy psi_eta * heta
        psi_eta_face = 0.5 * (deta_c[:, :-1] + deta_c[:, 1:])
        fx = -k_xi_face[:, 1:-1] * grid.m_xy[:, 1:-1] * psi_eta_face * heta
        corr[:, :-1] -= fx          # outward through east face of left cell
        corr[:, 1:] += fx           # inward for right cell
        # west Dirichlet face: tangential derivative of the boundary data
        if bcs["west"] is not None:
            dbc = _tangential_derivative(bcs["west"], heta)
            fxw = -k_xi_face[:, 0] * grid.m_xy[:, 0] * dbc * heta
            corr[:, 0] += fxw       # outward normal is -xi
        if bcs["east"] is not None:
            dbc = _tangential_derivative(bcs["east"], heta)
            fxe = -k_xi_face[:, -1] * grid.m_xy[:, -1] * dbc * heta
            corr[:, -1] -= fxe

        # cross flux through interior eta faces: -k m_yx psi_xi * hxi
        psi_xi_face = 0.5 * (dxi_c[:-1, :] + dxi_c[1:, :])
        fe = -k_eta_face[1:-1, :] * grid.m_yx[1:-1, :] * psi_xi_face * hxi
        corr[:-1, :] -= fe
        corr[1:, :] += fe
        if bcs["south"] is not None and not grid.axisymmetric:
            dbc = _tangential_derivative(bcs["south"], hxi)
            fes = -k_eta_face[0, :] * grid.m_yx[0, :] * dbc * hxi
            corr[0, :] += fes
        if bcs["north"] is not None:
            dbc = _tangential_derivative(bcs["north"], hxi)
            fen = -k_eta_face[-1, :] * grid.m_yx[-1, :] * dbc * hxi
            corr[-1, :] -= fen

        # quadratic Dirichlet flux corrections (skip the axis: its half-cell
        # transmissibility already integrates the 1/r singularity exactly)
        if bcs["west"] is not None:
            d_quad = (-(8.0 / 3.0) * bcs["west"] + 3.0 * psi[:, 0]
                      - (1.0 / 3.0) * psi[:, 1]) / hxi
            d_2pt = (psi[:, 0] - bcs["west"]) / (0.5 * hxi)
            corr[:, 0] -= k[:, 0] * grid.m_xx[:, 0] * heta * (d_quad - d_2pt)
        if bcs["east"] is not None:
            d_quad = ((8.0 / 3.0) * bcs["east"] - 3.0 * psi[:, -1]
                      + (1.0 / 3.0) * psi[:, -2]) / hxi
            d_2pt = (bcs["east"] - psi[:, -1]) / (0.5 * hxi)
            corr[:, -1] += k[:, -1] * grid.m_xx[:, -1] * heta * (d_quad - d_2pt)
        if bcs["south"] is not None and not grid.axisymmetric:
            d_quad = (-(8.0 / 3.0) * bcs["south"] + 3.0 * psi[0, :]
                      - (1.0 / 3.0) * psi[1, :]) / heta
            d_2pt = (psi[0, :] - bcs["south"]) / (0.5 * heta)
            corr[0, :] -= k[0, :] * grid.m_yy[0, :] * hxi * (d_quad - d_2pt)
        if bcs["north"] is not None:
            d_quad = ((8.0 / 3.0) * bcs["north"] - 3.0 * psi[-1, :]
                      + (1.0 / 3.0) * psi[-2, :]) / heta
            d_2pt = (bcs["north"] - psi[-1, :]) / (0.5 * heta)
            corr[-1, :] += k[-1, :] * grid.m_yy[-1, :] * hxi * (d_quad - d_2pt)

        return corr.ravel()

    return LinearSystem(matrix=A, rhs=rhs.ravel(), shape=(ne, nx),
                        apply_correction=apply_correction, has_dirichlet=has_dirichlet,
                        meta={"t_bc": t_bc, "bcs": bcs})


def _tangential_derivative(v, h):
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    d[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return d


# ----------------------------------------------------------------------
# symmetric Gauss-Seidel preconditioned CG
# ----------------------------------------------------------------------

@njit(cache=True)
def _lower_solve(indptr, indices, data, b, out):
    n = b.shape[0]
    for i in range(n):
        s = b[i]
        diag = 1.0
        for kk in range(indptr[i], indptr[i + 1]):
            j = indices[kk]
            if j < i:
                s -= data[kk] * out[j]
            elif j == i:
                diag = data[kk]
        out[i] = s / diag


@njit(cache=True)
def _upper_solve(indptr, indices, data, b, out):
    n = b.shape[0]
    for i in range(n - 1, -1, -1):
        s = b[i]
        diag = 1.0
        for kk in range(indptr[i], indptr[i + 1]):
            j = indices[kk]
            if j > i:
                s -= data[kk] * out[j]
            elif j == i:
                diag = data[kk]
        out[i] = s / diag


class _SGSPreconditioner:
    """M = (D+L) D^-1 (D+U); application uses two triangular sweeps."""

    def __init__(self, A):
        lower = sp.tril(A, format="csr")
        upper = sp.triu(A, format="csr")
        self._lo = (lower.indptr, lower.indices, lower.data)
        self._up = (upper.indptr, upper.indices, upper.data)
        self._diag = A.diagonal()
        self._tmp = np.empty(A.shape[0])

    def apply(self, r):
        y = np.empty_like(r)
        _lower_solve(*self._lo, r, self._tmp)
        _upper_solve(*self._up, self._diag * self._tmp, y)
        return y


def solve_linear(system, tol=1e-10, max_iter=20000, x0=None, return_info=False):
    """Preconditioned CG for the assembled two-point system.

    Stops at relative residual ||b - A x|| <= tol * ||b|| (absolute when the
    RHS vanishes).  Deterministic for fixed inputs; raises
    :class:`LinearSolverError` with the residual history on breakdown.
    """
    if not system.has_dirichlet:
        raise LinearSolverError("all-Neumann problem is singular; need a Dirichlet side")
    A = system.matrix
    b = np.asarray(system.rhs, dtype=float).ravel()
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float).ravel().copy()
    M = system.meta.get("_precond")
    if M is None:
        M = _SGSPreconditioner(A)
        system.meta["_precond"] = M

    bnorm = np.linalg.norm(b)
    target = tol * bnorm if bnorm > 0.0 else tol
    r = b - A @ x
    history = [float(np.linalg.norm(r))]
    if history[-1] <= target:
        res = (x.reshape(system.shape), {"niter": 0, "residuals": history})
        return res if return_info else res[0]
    z = M.apply(r)
    p = z.copy()
    rz = float(r @ z)
    niter = 0
    for niter in range(1, max_iter + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0 or not np.isfinite(pAp):
            raise LinearSolverError(f"CG breakdown: p'Ap = {pAp:.3e}", residuals=history)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rnorm = float(np.linalg.norm(r))
        history.append(rnorm)
        if rnorm <= target:
            break
        z = M.apply(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    else:
        raise LinearSolverError(
            f"CG did not reach tol {tol} in {max_iter} iterations "
            f"(last residual {history[-1]:.3e})", residuals=history)
    res = (x.reshape(system.shape), {"niter": niter, "residuals": history})
    return res if return_info else res[0]


def solve(problem, tol=1e-10, max_iter=20000, dc_tol=None, dc_max=60, x0=None,
          return_info=False):
    """Full solve: deferred-correction loop around the SPD CG core.

    Converges when the residual of the complete (cross terms included)
    discretization drops below tol * ||rhs_effective||.
    """
    system = assemble(problem)
    if dc_tol is None:
        dc_tol = tol
    A = system.matrix
    psi = (np.zeros(system.shape) if x0 is None else np.array(x0, dtype=float)).ravel()
    total_cg = 0
    passes = 0
    for passes in range(1, dc_max + 1):
        b_eff = system.rhs + system.apply_correction(psi)
        scale = max(np.linalg.norm(b_eff), _TINY)
        resid = float(np.linalg.norm(b_eff - A @ psi))
        if resid <= dc_tol * scale:
            break
        # inexact inner solves: no point resolving far below the current
        # deferred-correction residual
        pass_tol = min(max(tol, 0.05 * resid / scale), 0.25)
        sys_pass = LinearSystem(matrix=A, rhs=b_eff, shape=system.shape,
                                apply_correction=system.apply_correction,
                                has_dirichlet=system.has_dirichlet, meta=system.meta)
        psi2, info = solve_linear(sys_pass, tol=pass_tol, max_iter=max_iter, x0=psi,
                                  return_info=True)
        total_cg += info["niter"]
        psi = psi2.ravel()
    else:
        raise LinearSolverError(
            f"deferred-correction loop did not converge in {dc_max} passes")
    out = psi.reshape(system.shape)
    if return_info:
        return out, {"dc_passes": passes, "cg_iterations": total_cg}
    return out


def mms_error(exact, computed, grid):
    """Quadrature-weighted (L2, Linf) error norms of ``computed - exact``."""
    e = np.asarray(computed, dtype=float) - np.asarray(exact, dtype=float)
    l2 = float(np.sqrt(np.sum(e * e * grid.cell_measure)))
    linf = float(np.max(np.abs(e)))
    return l2, linf
