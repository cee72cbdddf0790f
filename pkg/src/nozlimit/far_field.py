"""Upstream profiles, subsonic Bernoulli roots, and far-field states.

The far-field constant (pressure, density, or incompressible head) is pinned
from the mass flux by monotone bisection on the subsonic branch; the inlet
stream-function profile and its inverse provide the backward characteristic
map used by the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.chebyshev import Chebyshev
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from .errors import ChokedFlowError, ClosureDomainError, FarFieldError

_QUAD_POINTS = 4097
_SCAN_POINTS = 8193


# ----------------------------------------------------------------------
# profile families
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantProfile:
    c: float

    def value(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.c)

    def derivative(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class PolynomialProfile:
    """Polynomial in ascending powers on [0, 1]."""

    coeffs: tuple

    def value(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), self.coeffs)

    def derivative(self, x):
        der = np.polynomial.polynomial.polyder(self.coeffs)
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), der)


@dataclass(frozen=True)
class TanhStepProfile:
    """base + delta * (1 + tanh((x - center)/width)) / 2."""

    base: float
    delta: float
    center: float = 0.5
    width: float = 0.2

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.base + 0.5 * self.delta * (1.0 + np.tanh((x - self.center) / self.width))

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        t = np.tanh((x - self.center) / self.width)
        return 0.5 * self.delta * (1.0 - t * t) / self.width


class UpstreamProfiles:
    """Upstream Bernoulli (and entropy) data on [0, 1].

    Profiles are kept both as closed forms (when given as profile objects)
    and as a 257-point Chebyshev table with cubic interpolation; derivatives
    fall back to differentiating the Chebyshev interpolant.
    """

    TABLE_DEGREE = 256

    def __init__(self, b_profile, s_profile=None):
        self._b = self._wrap(b_profile)
        self._s = self._wrap(s_profile) if s_profile is not None else None
        self.table_x = 0.5 * (1.0 - np.cos(np.pi * np.arange(self.TABLE_DEGREE + 1)
                                           / self.TABLE_DEGREE))
        self.table_b = self.b(self.table_x)
        self._b_spline = CubicSpline(self.table_x, self.table_b)
        if self._s is not None:
            self.table_s = self.s(self.table_x)
            self._s_spline = CubicSpline(self.table_x, self.table_s)
        xs = np.linspace(0.0, 1.0, _SCAN_POINTS)
        bv = self.b(xs)
        self.b_range = (float(bv.min()), float(bv.max()))
        if self._s is not None:
            sv = self.s(xs)
            self.s_range = (float(sv.min()), float(sv.max()))
            bs = bv * sv
            self.bs_range = (float(bs.min()), float(bs.max()))
        else:
            self.s_range = (1.0, 1.0)
            self.bs_range = self.b_range
        if self.b_range[0] <= 0.0:
            raise FarFieldError(f"upstream Bernoulli must be positive, min {self.b_range[0]}")
        if self.s_range[0] <= 0.0:
            raise FarFieldError(f"upstream entropy must be positive, min {self.s_range[0]}")

    @staticmethod
    def _wrap(profile):
        if profile is None:
            return None
        if hasattr(profile, "value") and hasattr(profile, "derivative"):
            return profile
        if np.isscalar(profile):
            return ConstantProfile(float(profile))
        # bare callable: spectral representation supplies the derivative
        cheb = Chebyshev.interpolate(profile, UpstreamProfiles.TABLE_DEGREE, domain=[0.0, 1.0])
        dcheb = cheb.deriv()

        class _Spectral:
            def value(self, x):
                return cheb(np.asarray(x, dtype=float))

            def derivative(self, x):
                return dcheb(np.asarray(x, dtype=float))

        return _Spectral()

    @property
    def has_entropy(self):
        return self._s is not None

    def b(self, x):
        return np.asarray(self._b.value(x), dtype=float)

    def db(self, x):
        return np.asarray(self._b.derivative(x), dtype=float)

    def s(self, x):
        if self._s is None:
            return np.ones_like(np.asarray(x, dtype=float))
        return np.asarray(self._s.value(x), dtype=float)

    def ds(self, x):
        if self._s is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        return np.asarray(self._s.derivative(x), dtype=float)

    def b_interp(self, x):
        """Cubic interpolation of the Chebyshev table (table-backed path)."""
        return self._b_spline(np.asarray(x, dtype=float))


# ----------------------------------------------------------------------
# subsonic branch roots
# ----------------------------------------------------------------------

_BISECT_ITERS = 200
_ROOT_TOL = 1e-14


def _as_arrays(*vals):
    arrs = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in vals])
    return arrs


def subsonic_root_homentropic(phi2, B, gamma, newton_polish=True):
    """Density on the subsonic branch of phi^2/(2 rho^2) + g/(g-1) rho^(g-1) = B.

    ``phi2`` is the squared momentum magnitude |rho u|^2.  Raises
    :class:`ChokedFlowError` when no subsonic root exists.
    """
    g = float(gamma)
    phi2_a, B_a = _as_arrays(phi2, B)
    scalar = phi2_a.ndim == 0
    phi2_a = np.atleast_1d(phi2_a)
    B_a = np.atleast_1d(B_a)
    if np.any(phi2_a < 0.0):
        raise ClosureDomainError("squared stream gradient must be >= 0",
                                 cell=_first_bad(phi2_a < 0.0, phi2_a),
                                 value=float(phi2_a[phi2_a < 0.0].flat[0]))
    if np.any(B_a <= 0.0):
        raise ClosureDomainError("Bernoulli head must be positive",
                                 cell=_first_bad(B_a <= 0.0, B_a),
                                 value=float(B_a[B_a <= 0.0].flat[0]))

    rho_sonic = np.power(phi2_a / g, 1.0 / (g + 1.0))
    g_sonic = (g + 1.0) / (2.0 * (g - 1.0)) * g * np.power(rho_sonic, g - 1.0)
    margin = g_sonic - B_a
    if np.any(margin > 0.0):
        k = int(np.argmax(margin))
        raise ChokedFlowError("no subsonic density root", margin=float(margin.flat[k]),
                              cell=np.unravel_index(k, margin.shape))
    rho_stag = np.power((g - 1.0) * B_a / g, 1.0 / (g - 1.0))

    def resid(rho):
        with np.errstate(divide="ignore"):
            kin = np.where(phi2_a > 0.0, phi2_a / (2.0 * rho * rho), 0.0)
        return kin + g / (g - 1.0) * np.power(rho, g - 1.0) - B_a

    lo = rho_sonic.copy()
    hi = rho_stag.copy()
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        f = resid(mid)
        take_hi = f > 0.0
        hi = np.where(take_hi, mid, hi)
        lo = np.where(take_hi, lo, mid)
        if np.max(hi - lo) <= _ROOT_TOL * (1.0 + np.max(hi)):
            break
    rho = 0.5 * (lo + hi)
    if newton_polish:
        for _ in range(3):
            with np.errstate(divide="ignore"):
                dg = -phi2_a / rho ** 3 + g * np.power(rho, g - 2.0)
            step = np.where(dg > 0.0, resid(rho) / np.where(dg > 0.0, dg, 1.0), 0.0)
            rho = np.clip(rho - step, rho_sonic, rho_stag)
    return float(rho[0]) if scalar else rho.reshape(np.broadcast(np.asarray(phi2),
                                                                 np.asarray(B)).shape)


def subsonic_root_full(phi2, B, S, gamma, newton_polish=True):
    """Pressure on the subsonic branch of
    phi^2/(2 p^(2/g)) + g p^((g-1)/g) / ((g-1) S) = B."""
    g = float(gamma)
    phi2_a, B_a, S_a = _as_arrays(phi2, B, S)
    scalar = phi2_a.ndim == 0
    phi2_a = np.atleast_1d(phi2_a)
    B_a = np.atleast_1d(B_a)
    S_a = np.atleast_1d(S_a)
    if np.any(S_a <= 0.0):
        raise ClosureDomainError("entropy must be positive",
                                 cell=_first_bad(S_a <= 0.0, S_a),
                                 value=float(S_a[S_a <= 0.0].flat[0]))
    if np.any(phi2_a < 0.0):
        raise ClosureDomainError("squared stream gradient must be >= 0")

    p_sonic = np.power(S_a * phi2_a / g, g / (g + 1.0))
    g_sonic = (g + 1.0) / (2.0 * (g - 1.0)) * g * np.power(p_sonic, (g - 1.0) / g) / S_a
    margin = g_sonic - B_a
    if np.any(margin > 0.0):
        k = int(np.argmax(margin))
        raise ChokedFlowError("no subsonic pressure root", margin=float(margin.flat[k]),
                              cell=np.unravel_index(k, margin.shape))
    p_stag = np.power((g - 1.0) * S_a * B_a / g, g / (g - 1.0))

    def resid(p):
        with np.errstate(divide="ignore"):
            kin = np.where(phi2_a > 0.0, phi2_a / (2.0 * np.power(p, 2.0 / g)), 0.0)
        return kin + g / ((g - 1.0) * S_a) * np.power(p, (g - 1.0) / g) - B_a

    lo = p_sonic.copy()
    hi = p_stag.copy()
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        f = resid(mid)
        take_hi = f > 0.0
        hi = np.where(take_hi, mid, hi)
        lo = np.where(take_hi, lo, mid)
        if np.max(hi - lo) <= _ROOT_TOL * (1.0 + np.max(hi)):
            break
    p = 0.5 * (lo + hi)
    if newton_polish:
        for _ in range(3):
            dg = -(phi2_a / g) * np.power(p, -(g + 2.0) / g) + np.power(p, -1.0 / g) / S_a
            step = np.where(dg > 0.0, resid(p) / np.where(dg > 0.0, dg, 1.0), 0.0)
            p = np.clip(p - step, p_sonic, p_stag)
    return float(p[0]) if scalar else p.reshape(np.broadcast(np.asarray(phi2),
                                                             np.asarray(B)).shape)


def _first_bad(mask, arr):
    flat = np.flatnonzero(mask)
    return tuple(int(c) for c in np.unravel_index(int(flat[0]), arr.shape)) if flat.size else None


# ----------------------------------------------------------------------
# far-field states
# ----------------------------------------------------------------------

class FarFieldState:
    """Upstream asymptotic state and the inlet stream-function profile."""

    def __init__(self, kind, m, gamma, upstream, constant, velocity_fn, density_fn,
                 weight_r):
        self.kind = kind
        self.m = float(m)
        self.gamma = gamma
        self.upstream = upstream
        self.constant = float(constant)
        self._velocity_fn = velocity_fn
        self._density_fn = density_fn
        self.weight_r = bool(weight_r)

        x = np.linspace(0.0, 1.0, _QUAD_POINTS)
        integrand = self.stream_weight(x) * velocity_fn(x)
        psi = cumulative_simpson(integrand, x=x, initial=0.0)
        self._psi_x = x
        self._psi_table = psi
        self._psi_spline = CubicSpline(x, psi)
        self._dpsi_spline = self._psi_spline.derivative()
        self.psi_total = float(psi[-1])
        if self.psi_total <= 0.0:
            raise FarFieldError("inlet stream-function range collapsed")

    # -- profile evaluations -------------------------------------------------

    def velocity(self, x):
        return self._velocity_fn(np.asarray(x, dtype=float))

    def density(self, x):
        return self._density_fn(np.asarray(x, dtype=float))

    def stream_weight(self, x):
        """Weight a- in psi' = a- * u-(x): p-^(1/g) for full Euler, rho- (times
        r on axisymmetric grids), and 1 (times r) for the frozen closure."""
        x = np.asarray(x, dtype=float)
        if self.kind == "full_euler":
            w = np.full_like(x, self.constant ** (1.0 / self.gamma))
        else:
            w = self.density(x)
        if self.weight_r:
            w = w * x
        return w

    def psi(self, x):
        return self._psi_spline(np.asarray(x, dtype=float))

    def label(self, psi_vals):
        """Inverse of the inlet profile: labels in [0, 1] (vectorized Newton)."""
        y = np.clip(np.asarray(psi_vals, dtype=float), 0.0, self.psi_total)
        lam = np.interp(y, self._psi_table, self._psi_x)
        for _ in range(8):
            f = self._psi_spline(lam) - y
            df = np.maximum(self._dpsi_spline(lam), 1e-300)
            lam = np.clip(lam - f / df, 0.0, 1.0)
        return lam


def _simpson_weights(n):
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * ((1.0 / (n - 1)) / 3.0)


_QX = np.linspace(0.0, 1.0, _QUAD_POINTS)
_QW = _simpson_weights(_QUAD_POINTS)


def _bisect_decreasing(fn, lo, hi, target):
    """Solve fn(p) = target for decreasing fn by bisection on [lo, hi]."""
    a, b = float(lo), float(hi)
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (a + b)
        if fn(mid) > target:
            a = mid
        else:
            b = mid
        if b - a <= _ROOT_TOL * (1.0 + abs(b)):
            break
    return 0.5 * (a + b)


def _full_velocity_sq(x, p_minus, upstream, g):
    return 2.0 * (upstream.b(x) - g / (g - 1.0) * p_minus ** ((g - 1.0) / g)
                  / upstream.s(x))


def far_field_full_euler(m, upstream, gamma):
    """Constant inlet pressure and velocity profile realizing mass flux ``m``."""
    g = float(gamma)
    if m <= 0.0:
        raise FarFieldError(f"mass flux must be positive, got {m}")
    bs_min = upstream.bs_range[0]
    p_hi = ((g - 1.0) / g * bs_min) ** (g / (g - 1.0))

    def flux(p):
        u2 = np.maximum(_full_velocity_sq(_QX, p, upstream, g), 0.0)
        u = np.sqrt(u2)
        return float(np.sum(_QW * upstream.s(_QX) * p ** (1.0 / g) * u))

    def max_mach(p):
        u2 = np.maximum(_full_velocity_sq(_QX, p, upstream, g), 0.0)
        c2 = g * p ** ((g - 1.0) / g) / upstream.s(_QX)
        return float(np.max(u2 / c2))

    if max_mach(p_hi) >= 1.0:
        raise FarFieldError("upstream data admits no subsonic state at any flux")
    p_lo = p_hi
    for _ in range(200):
        p_lo *= 0.5
        if max_mach(p_lo) > 1.0:
            break
    else:
        raise FarFieldError("could not bracket the sonic inlet pressure")
    p_choke = _bisect_decreasing(lambda p: max_mach(p), p_lo, p_hi, 1.0)
    m_hat = flux(p_choke)
    m_floor = flux(p_hi)
    if m >= m_hat:
        raise ChokedFlowError(f"mass flux {m} exceeds the sonic-limited maximum {m_hat:.6g}",
                              margin=m - m_hat)
    if m <= m_floor:
        raise FarFieldError(
            f"mass flux {m} at or below the minimum realizable flux {m_floor:.6g} "
            "for this upstream profile")
    p_minus = _bisect_decreasing(flux, p_choke, p_hi, m)

    def vel(x):
        return np.sqrt(np.maximum(_full_velocity_sq(x, p_minus, upstream, g), 0.0))

    def dens(x):
        return p_minus ** (1.0 / g) * upstream.s(x)

    return FarFieldState("full_euler", m, g, upstream, p_minus, vel, dens, weight_r=False)


def far_field_axisym(m, upstream, gamma):
    """Constant inlet density and axial profile for the axisymmetric flow."""
    g = float(gamma)
    if m <= 0.0:
        raise FarFieldError(f"mass flux must be positive, got {m}")
    b_min = upstream.b_range[0]
    rho_hi = ((g - 1.0) / g * b_min) ** (1.0 / (g - 1.0))

    def vel_sq(x, rho):
        return 2.0 * (upstream.b(x) - g / (g - 1.0) * rho ** (g - 1.0))

    def flux(rho):
        u = np.sqrt(np.maximum(vel_sq(_QX, rho), 0.0))
        return float(np.sum(_QW * rho * u * _QX))

    def max_mach(rho):
        u2 = np.maximum(vel_sq(_QX, rho), 0.0)
        return float(np.max(u2 / (g * rho ** (g - 1.0))))

    if max_mach(rho_hi) >= 1.0:
        raise FarFieldError("upstream data admits no subsonic state at any flux")
    rho_lo = rho_hi
    for _ in range(200):
        rho_lo *= 0.5
        if max_mach(rho_lo) > 1.0:
            break
    else:
        raise FarFieldError("could not bracket the sonic inlet density")
    rho_choke = _bisect_decreasing(max_mach, rho_lo, rho_hi, 1.0)
    m_hat = flux(rho_choke)
    m_floor = flux(rho_hi)
    if m >= m_hat:
        raise ChokedFlowError(f"mass flux {m} exceeds the sonic-limited maximum {m_hat:.6g}",
                              margin=m - m_hat)
    if m <= m_floor:
        raise FarFieldError(
            f"mass flux {m} at or below the minimum realizable flux {m_floor:.6g} "
            "for this upstream profile")
    rho_minus = _bisect_decreasing(flux, rho_choke, rho_hi, m)

    def vel(x):
        return np.sqrt(np.maximum(vel_sq(x, rho_minus), 0.0))

    def dens(x):
        return np.full_like(np.asarray(x, dtype=float), rho_minus)

    return FarFieldState("homentropic_axisym", m, g, upstream, rho_minus, vel, dens,
                         weight_r=True)


def far_field_incompressible(m, upstream, axisym):
    """Unit-density far field: u- = sqrt(2 (B- - lam)), lam pinned by the flux."""
    if m <= 0.0:
        raise FarFieldError(f"mass flux must be positive, got {m}")
    b_min, b_max = upstream.b_range

    def flux(lam):
        u = np.sqrt(np.maximum(2.0 * (upstream.b(_QX) - lam), 0.0))
        w = _QX if axisym else 1.0
        return float(np.sum(_QW * u * w))

    m_floor = flux(b_min)
    if m <= m_floor:
        raise FarFieldError(
            f"mass flux {m} at or below the minimum realizable flux {m_floor:.6g}")
    lam_lo = b_min - 1.0
    for _ in range(200):
        if flux(lam_lo) > m:
            break
        lam_lo = b_min - 2.0 * (b_min - lam_lo)
    else:
        raise FarFieldError("could not bracket the incompressible head")
    lam = _bisect_decreasing(flux, lam_lo, b_min, m)

    def vel(x):
        return np.sqrt(np.maximum(2.0 * (upstream.b(x) - lam), 0.0))

    def dens(x):
        return np.ones_like(np.asarray(x, dtype=float))

    kind = "incompressible_axisym" if axisym else "incompressible_2d"
    return FarFieldState(kind, m, None, upstream, lam, vel, dens, weight_r=axisym)


def choking_flux(upstream, gamma, axisym=False):
    """Sonic-limited maximal mass flux for the given upstream data."""
    g = float(gamma)
    if axisym:
        b_min = upstream.b_range[0]
        rho_hi = ((g - 1.0) / g * b_min) ** (1.0 / (g - 1.0))

        def vel_sq(x, rho):
            return 2.0 * (upstream.b(x) - g / (g - 1.0) * rho ** (g - 1.0))

        def flux(rho):
            u = np.sqrt(np.maximum(vel_sq(_QX, rho), 0.0))
            return float(np.sum(_QW * rho * u * _QX))

        def max_mach(rho):
            u2 = np.maximum(vel_sq(_QX, rho), 0.0)
            return float(np.max(u2 / (g * rho ** (g - 1.0))))

        hi = rho_hi
    else:
        bs_min = upstream.bs_range[0]
        p_hi = ((g - 1.0) / g * bs_min) ** (g / (g - 1.0))

        def flux(p):
            u2 = np.maximum(_full_velocity_sq(_QX, p, upstream, g), 0.0)
            return float(np.sum(_QW * upstream.s(_QX) * p ** (1.0 / g) * np.sqrt(u2)))

        def max_mach(p):
            u2 = np.maximum(_full_velocity_sq(_QX, p, upstream, g), 0.0)
            c2 = g * p ** ((g - 1.0) / g) / upstream.s(_QX)
            return float(np.max(u2 / c2))

        hi = p_hi
    if max_mach(hi) >= 1.0:
        raise FarFieldError("upstream data admits no subsonic state at any flux")
    lo = hi
    for _ in range(200):
        lo *= 0.5
        if max_mach(lo) > 1.0:
            break
    else:
        raise FarFieldError("could not bracket the sonic point")
    choke = _bisect_decreasing(max_mach, lo, hi, 1.0)
    return flux(choke)
