"""Nozzle wall families, wall-fitted mapped grids, and face-flux machinery.

The computational domain is the rectangle (xi, eta) in [-L, L] x [0, 1] with
x1 = xi and x2 (or r) = lower(xi) + eta * width(xi).  All metric terms are
analytic; cells are centered, faces live on the coordinate lines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, InputError


def _tanh_blend(c0, c1, x):
    """c0 + c1*(1+tanh x)/2 with first and second derivatives."""
    x = np.asarray(x, dtype=float)
    t = np.tanh(x)
    sech2 = 1.0 - t * t
    val = c0 + 0.5 * c1 * (1.0 + t)
    dval = 0.5 * c1 * sech2
    d2val = -c1 * sech2 * t
    return val, dval, d2val


@dataclass(frozen=True)
class NozzleGeometry2D:
    """Planar nozzle with tanh walls: lower 0 -> a, upper 1 -> b."""

    a: float
    b: float

    def __post_init__(self):
        if self.a < 0.0:
            raise GeometryError(f"lower wall limit a must be >= 0, got {self.a}")
        if self.b <= self.a:
            raise GeometryError(f"need b > a, got a={self.a}, b={self.b}")

    @property
    def axisymmetric(self):
        return False

    def walls(self, x1):
        """Return (f1, f1', f1'', f2, f2', f2'') at x1."""
        f1, df1, d2f1 = _tanh_blend(0.0, self.a, x1)
        f2, df2, d2f2 = _tanh_blend(1.0, self.b - 1.0, x1)
        return f1, df1, d2f1, f2, df2, d2f2

    def lower(self, x1):
        return _tanh_blend(0.0, self.a, x1)

    def width(self, x1):
        f1, df1, d2f1 = _tanh_blend(0.0, self.a, x1)
        f2, df2, d2f2 = _tanh_blend(1.0, self.b - 1.0, x1)
        return f2 - f1, df2 - df1, d2f2 - d2f1


@dataclass(frozen=True)
class NozzleGeometryAxisym:
    """Axisymmetric nozzle wall: radius 1 upstream -> r0 downstream."""

    r0: float

    def __post_init__(self):
        if self.r0 <= 0.0:
            raise GeometryError(f"wall radius r0 must be > 0, got {self.r0}")

    @property
    def axisymmetric(self):
        return True

    def walls(self, x1):
        """Return (f, f', f'') at x1."""
        return _tanh_blend(1.0, self.r0 - 1.0, x1)

    def lower(self, x1):
        x1 = np.asarray(x1, dtype=float)
        z = np.zeros_like(x1)
        return z, z.copy(), z.copy()

    def width(self, x1):
        return _tanh_blend(1.0, self.r0 - 1.0, x1)


def wall_profiles(geometry, x1):
    """Wall ordinates and their first/second derivatives at x1.

    2D geometries return (f1, f1', f1'', f2, f2', f2''); axisymmetric ones
    return (f, f', f'').
    """
    return geometry.walls(x1)


class MappedGrid:
    """Cell-centered finite-volume grid on the wall-fitted mapping.

    Fields are stored as (n_eta, n_xi) arrays: row index j runs across the
    nozzle (eta), column index i runs along it (xi).  xi faces sit between
    columns, eta faces between rows; walls are exactly the eta = 0, 1 lines.
    """

    def __init__(self, geometry, L, n_xi, n_eta):
        if L <= 0.0:
            raise GeometryError(f"truncation half-length must be > 0, got {L}")
        if n_xi < 4 or n_eta < 4:
            raise GeometryError(f"need at least 4 cells per direction, got {n_xi}x{n_eta}")
        self.geometry = geometry
        self.axisymmetric = geometry.axisymmetric
        self.L = float(L)
        self.n_xi = int(n_xi)
        self.n_eta = int(n_eta)
        self.hxi = 2.0 * self.L / self.n_xi
        self.heta = 1.0 / self.n_eta

        self.xi_f = -self.L + self.hxi * np.arange(self.n_xi + 1)
        self.eta_f = self.heta * np.arange(self.n_eta + 1)
        self.xi_c = 0.5 * (self.xi_f[:-1] + self.xi_f[1:])
        self.eta_c = 0.5 * (self.eta_f[:-1] + self.eta_f[1:])

        lo_c, dlo_c, _ = geometry.lower(self.xi_c)
        w_c, dw_c, _ = geometry.width(self.xi_c)
        lo_f, dlo_f, _ = geometry.lower(self.xi_f)
        w_f, dw_f, _ = geometry.width(self.xi_f)
        if np.any(w_c <= 0.0) or np.any(w_f <= 0.0):
            raise GeometryError("degenerate mapping: wall separation <= 0 inside the truncation")
        self._lo_c, self._dlo_c, self._w_c, self._dw_c = lo_c, dlo_c, w_c, dw_c
        self._lo_f, self._dlo_f, self._w_f, self._dw_f = lo_f, dlo_f, w_f, dw_f

        eta_c = self.eta_c[:, None]
        eta_f = self.eta_f[:, None]

        # cell-center geometry
        self.x1_c = np.broadcast_to(self.xi_c, (self.n_eta, self.n_xi)).copy()
        self.x2_c = lo_c + eta_c * w_c
        self.jac_c = np.broadcast_to(w_c, (self.n_eta, self.n_xi)).copy()
        self.etax_c = -(dlo_c + eta_c * dw_c) / w_c
        self.width_c = self.jac_c
        self.r_c = self.x2_c if self.axisymmetric else None

        # corner coordinates (n_eta+1, n_xi+1)
        self.x2_corner = lo_f + eta_f * w_f

        # planar cell measure; for axisymmetric grids also the r-weighted one
        self.cell_measure = self.jac_c * self.hxi * self.heta
        if self.axisymmetric:
            self.cell_measure_rw = self.r_c * self.cell_measure
        else:
            self.cell_measure_rw = self.cell_measure

        # ---- xi faces: vertical segments, geometric area = delta x2 ----
        # values indexed [j, i_f], i_f = 0..n_xi
        self.area_xi = self.x2_corner[1:, :] - self.x2_corner[:-1, :]
        self.x2_xi_mid = 0.5 * (self.x2_corner[1:, :] + self.x2_corner[:-1, :])
        etax_xf = -(dlo_f + eta_c * dw_f) / w_f
        if self.axisymmetric:
            r_xf = eta_c * w_f
            weight = 1.0 / r_xf
        else:
            weight = 1.0
        # two-point and cross metric factors for the divergence-form operator
        self.m_xx = np.broadcast_to(w_f, (self.n_eta, self.n_xi + 1)).copy() * weight
        self.m_xy = w_f * etax_xf * weight
        self.r_xi = eta_c * w_f if self.axisymmetric else None

        # ---- eta faces: indexed [j_f, i], j_f = 0..n_eta ----
        etax_ef = -(dlo_c + eta_f * dw_c) / w_c
        gyy = etax_ef * etax_ef + 1.0 / (w_c * w_c)
        if self.axisymmetric:
            r_ef = eta_f * w_c
            weight_e = np.zeros_like(r_ef)
            np.divide(1.0, r_ef, out=weight_e, where=r_ef > 0.0)
        else:
            weight_e = 1.0
        # on axisymmetric grids the axis row (r = 0) is zeroed here: the axis
        # face uses the resistance-integrated transmissibility instead, and
        # carries no cross term (eta_x1 = 0 on the axis)
        self.m_yy = w_c * gyy * weight_e
        self.m_yx = w_c * etax_ef * weight_e
        self.r_eta = eta_f * w_c if self.axisymmetric else None
        self.etax_ef = etax_ef

        # axis half-cell transmissibility: resistance integral of
        # beta(eta) = (1 + eta^2 f'^2) / (eta f^2) over (0, heta/2),
        # exact for the quadratic leading behaviour of psi near the axis.
        if self.axisymmetric:
            eta0 = 0.5 * self.heta
            fp = dw_c
            f = w_c
            with np.errstate(divide="ignore", invalid="ignore"):
                resist = np.where(
                    np.abs(fp) > 1e-8,
                    f * f / (2.0 * fp * fp) * np.log1p(eta0 * eta0 * fp * fp),
                    0.5 * f * f * eta0 * eta0,
                )
            self.axis_transmissibility = 1.0 / resist
        else:
            self.axis_transmissibility = None

    # ------------------------------------------------------------------
    # interpolation and flux helpers
    # ------------------------------------------------------------------

    def interp_to_xi_faces(self, c):
        """Linear interpolation of a cell field to xi faces (one-sided at ends)."""
        out = np.empty((self.n_eta, self.n_xi + 1))
        out[:, 1:-1] = 0.5 * (c[:, :-1] + c[:, 1:])
        out[:, 0] = c[:, 0]
        out[:, -1] = c[:, -1]
        return out

    def interp_to_eta_faces(self, c):
        """Interpolation to eta faces; boundary faces copy the adjacent cell."""
        out = np.empty((self.n_eta + 1, self.n_xi))
        out[1:-1, :] = 0.5 * (c[:-1, :] + c[1:, :])
        out[0, :] = c[0, :]
        out[-1, :] = c[-1, :]
        return out

    def face_normal_fluxes(self, F1, F2, r_weight=False):
        """Geometric normal fluxes of a cell vector field through all faces.

        xi faces use the +x1 normal, eta faces the +eta-pointing normal
        (-slope, 1) * hxi.  With ``r_weight`` the flux integrand carries the
        physical r factor (exact for the linear-in-r face profile).
        """
        f1x = self.interp_to_xi_faces(F1)
        flux_xi = f1x * self.area_xi
        if r_weight:
            if not self.axisymmetric:
                raise InputError("r-weighted fluxes only exist on axisymmetric grids")
            flux_xi = flux_xi * self.x2_xi_mid
        f1e = self.interp_to_eta_faces(F1)
        f2e = self.interp_to_eta_faces(F2)
        slope = self._dlo_c + self.eta_f[:, None] * self._dw_c
        flux_eta = (f2e - slope * f1e) * self.hxi
        if r_weight:
            flux_eta = flux_eta * self.r_eta
        return flux_xi, flux_eta

    def divergence_from_fluxes(self, flux_xi, flux_eta, r_weight=False):
        """Cell divergence matching :meth:`face_normal_fluxes` (per unit measure)."""
        net = (flux_xi[:, 1:] - flux_xi[:, :-1]) + (flux_eta[1:, :] - flux_eta[:-1, :])
        measure = self.cell_measure_rw if r_weight else self.cell_measure
        return net / measure

    def corner_interp(self, c, south=None, north=None, west=None, east=None):
        """Cell field interpolated to corners, honoring known boundary values.

        Side arrays, when given, are corner values (length n+1 along the
        side).  Unspecified sides extrapolate linearly from the interior.
        """
        ne, nx = self.n_eta, self.n_xi
        pad = np.empty((ne + 2, nx + 2))
        pad[1:-1, 1:-1] = c
        pad[0, 1:-1] = 2.0 * c[0, :] - c[1, :]
        pad[-1, 1:-1] = 2.0 * c[-1, :] - c[-2, :]
        pad[:, 0] = 2.0 * pad[:, 1] - pad[:, 2]
        pad[:, -1] = 2.0 * pad[:, -2] - pad[:, -3]
        corners = 0.25 * (pad[:-1, :-1] + pad[1:, :-1] + pad[:-1, 1:] + pad[1:, 1:])
        if south is not None:
            corners[0, :] = south
        if north is not None:
            corners[-1, :] = north
        if west is not None:
            corners[:, 0] = west
        if east is not None:
            corners[:, -1] = east
        return corners

    # ------------------------------------------------------------------
    # derivatives
    # ------------------------------------------------------------------

    def _d_eta(self, c, south=None, north=None):
        """eta-derivative at cell centers, second order everywhere.

        ``south``/``north`` are Dirichlet face values (length n_xi); without
        them one-sided three-point stencils are used.
        """
        h = self.heta
        d = np.empty_like(c)
        d[1:-1, :] = (c[2:, :] - c[:-2, :]) / (2.0 * h)
        if south is not None:
            # quadratic through (face, c0, c1); derivative at the first center
            d[0, :] = (-(4.0 / 3.0) * south + c[0, :] + (1.0 / 3.0) * c[1, :]) / h
        else:
            d[0, :] = (-3.0 * c[0, :] + 4.0 * c[1, :] - c[2, :]) / (2.0 * h)
        if north is not None:
            d[-1, :] = ((4.0 / 3.0) * north - c[-1, :] - (1.0 / 3.0) * c[-2, :]) / h
        else:
            d[-1, :] = (3.0 * c[-1, :] - 4.0 * c[-2, :] + c[-3, :]) / (2.0 * h)
        return d

    def _d_xi(self, c, west=None, east=None):
        h = self.hxi
        d = np.empty_like(c)
        d[:, 1:-1] = (c[:, 2:] - c[:, :-2]) / (2.0 * h)
        if west is not None:
            d[:, 0] = (-(4.0 / 3.0) * west + c[:, 0] + (1.0 / 3.0) * c[:, 1]) / h
        else:
            d[:, 0] = (-3.0 * c[:, 0] + 4.0 * c[:, 1] - c[:, 2]) / (2.0 * h)
        if east is not None:
            d[:, -1] = ((4.0 / 3.0) * east - c[:, -1] - (1.0 / 3.0) * c[:, -2]) / h
        else:
            d[:, -1] = (3.0 * c[:, -1] - 4.0 * c[:, -2] + c[:, -3]) / (2.0 * h)
        return d

    def grad(self, c, south=None, north=None, west=None, east=None):
        """Physical gradient (d/dx1, d/dx2) of a cell field.

        Optional keyword arrays are Dirichlet face values used for one-sided
        boundary stencils.
        """
        dxi = self._d_xi(c, west=west, east=east)
        deta = self._d_eta(c, south=south, north=north)
        dx1 = dxi + self.etax_c * deta
        dx2 = deta / self.width_c
        return dx1, dx2

    def curl(self, u1, u2):
        """Discrete planar curl d(u2)/dx1 - d(u1)/dx2 at cell centers."""
        du2_dx1, _ = self.grad(u2)
        _, du1_dx2 = self.grad(u1)
        return du2_dx1 - du1_dx2


def build_grid(geometry, L, n_xi, n_eta):
    """Construct a :class:`MappedGrid` with analytic metric terms."""
    return MappedGrid(geometry, L, n_xi, n_eta)


def domain_measure(grid):
    """Planar Lebesgue measure of the truncated domain (sum of cell measures)."""
    return float(np.sum(grid.cell_measure))


def section_flux(state, grid, i_face):
    """Discrete mass flux of rho*u through the xi-face line ``i_face``.

    Solver states carry exactly conservative face fluxes built from the
    stream function; those are used when present.  Otherwise the flux is the
    midpoint quadrature of interpolated cell values against the geometric
    face normals (r-weighted on axisymmetric grids).
    """
    if not 0 <= i_face <= grid.n_xi:
        raise InputError(f"section index {i_face} outside 0..{grid.n_xi}")
    fluxes = getattr(state, "face_mass_flux_xi", None)
    if fluxes is not None:
        return float(np.sum(fluxes[:, i_face]))
    F1 = state.rho * state.u1
    F2 = state.rho * state.u2
    flux_xi, _ = grid.face_normal_fluxes(F1, F2, r_weight=grid.axisymmetric)
    return float(np.sum(flux_xi[:, i_face]))
