"""Gas-dynamic closures, state containers, and subsonic a-priori bounds."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ClosureDomainError, FarFieldError


class GasKind(Enum):
    HOMENTROPIC = "homentropic"
    FULL_EULER = "full_euler"


@dataclass(frozen=True)
class GasModel:
    """Polytropic gas closure: p = rho^gamma (homentropic) or full Euler."""

    kind: GasKind
    gamma: float

    def __post_init__(self):
        if self.gamma <= 1.0:
            raise ClosureDomainError(f"gamma must exceed 1, got {self.gamma}")

    @property
    def homentropic(self):
        return self.kind is GasKind.HOMENTROPIC


@dataclass
class FlowState:
    """Primitive fields on a grid.  ``p`` may be None for the frozen
    incompressible closure, which never produces a pressure."""

    rho: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    p: np.ndarray | None
    grid: object
    psi: np.ndarray | None = None
    face_mass_flux_xi: np.ndarray | None = None
    face_mass_flux_eta: np.ndarray | None = None
    face_aflux_xi: np.ndarray | None = None
    face_aflux_eta: np.ndarray | None = None

    @property
    def speed(self):
        return np.hypot(self.u1, self.u2)


@dataclass
class DerivedFields:
    mach: np.ndarray
    bernoulli: np.ndarray
    entropy: np.ndarray
    energy: np.ndarray
    vorticity: np.ndarray


@dataclass(frozen=True)
class AprioriBounds:
    """Closed-form subsonic bounds implied by the upstream data."""

    speed_max: float
    p_min: float
    p_max: float
    e_min: float
    e_max: float
    mach_bar: float = 1.0


def _first_violation(mask):
    flat = np.flatnonzero(mask)
    return int(flat[0]) if flat.size else None


def _require_positive(arr, name, strict=True):
    arr = np.asarray(arr)
    bad = arr <= 0.0 if strict else arr < 0.0
    if np.any(bad):
        k = _first_violation(bad)
        cell = np.unravel_index(k, arr.shape)
        raise ClosureDomainError(f"{name} must be positive", cell=tuple(int(c) for c in cell),
                                 value=float(arr.flat[k]))


def sonic_speed(state, gas):
    """Local sonic speed c."""
    _require_positive(state.p, "pressure")
    if gas.homentropic:
        return np.sqrt(gas.gamma) * np.power(state.p, (gas.gamma - 1.0) / (2.0 * gas.gamma))
    _require_positive(state.rho, "density")
    return np.sqrt(gas.gamma * state.p / state.rho)


def mach_number(state, gas):
    """Mach number |u| / c."""
    return state.speed / sonic_speed(state, gas)


def bernoulli(state, gas):
    """Bernoulli head: |u|^2/2 + enthalpy (kind-appropriate form)."""
    g = gas.gamma
    kin = 0.5 * (state.u1 ** 2 + state.u2 ** 2)
    if gas.homentropic:
        _require_positive(state.rho, "density", strict=False)
        return kin + g / (g - 1.0) * np.power(state.rho, g - 1.0)
    _require_positive(state.rho, "density")
    return kin + g / (g - 1.0) * state.p / state.rho

def total_energy(state, gas):
    """Total energy E; satisfies B = E + p/rho for the full Euler closure."""
    g = gas.gamma
    kin = 0.5 * (state.u1 ** 2 + state.u2 ** 2)
    if gas.homentropic:
        _require_positive(state.p, "pressure")
        return kin + np.power(state.p, (g - 1.0) / g) / (g - 1.0)
    _require_positive(state.rho, "density")
    return kin + state.p / ((g - 1.0) * state.rho)


def entropy(state, gas):
    """Entropy function rho * p^(-1/gamma); identically 1 for homentropic gas."""
    if gas.homentropic:
        return np.ones_like(np.asarray(state.rho, dtype=float))
    _require_positive(state.p, "pressure")
    return state.rho * np.power(state.p, -1.0 / gas.gamma)


def derived_fields(state, gas, vorticity=None):
    """Bundle M, B, S, E and a vorticity field (discrete curl by default)."""
    if vorticity is None:
        vorticity = state.grid.curl(state.u1, state.u2)
    return DerivedFields(
        mach=mach_number(state, gas),
        bernoulli=bernoulli(state, gas),
        entropy=entropy(state, gas),
        energy=total_energy(state, gas),
        vorticity=vorticity,
    )


def apriori_bounds(gamma, upstream, gas, mach_bar=1.0):
    """Subsonic speed/pressure/energy bounds from the upstream profiles.

    speed_max = sqrt(2 (g-1)/(g+1) max B-), and the pressure sandwich uses
    min/max of the product B- * S- (S- identically 1 for homentropic gas).
    Energy bounds evaluate the pressure-energy sandwich at M = mach_bar.
    """
    g = float(gamma)
    if g <= 1.0:
        raise ClosureDomainError(f"gamma must exceed 1, got {g}")
    b_min, b_max = upstream.b_range
    if b_min <= 0.0:
        raise FarFieldError(f"upstream Bernoulli must be positive, min is {b_min}")
    if gas.homentropic:
        bs_min, bs_max = b_min, b_max
    else:
        bs_min, bs_max = upstream.bs_range
        s_min, _ = upstream.s_range
        if s_min <= 0.0:
            raise FarFieldError(f"upstream entropy must be positive, min is {s_min}")
    speed_max = np.sqrt(2.0 * (g - 1.0) / (g + 1.0) * b_max)
    p_min = (2.0 * (g - 1.0) / (g * (g + 1.0)) * bs_min) ** (g / (g - 1.0))
    p_max = ((g - 1.0) / g * bs_max) ** (g / (g - 1.0))
    e_min = p_min ** (1.0 - 1.0 / g) / (g - 1.0)
    e_max = ((g - 1.0) * g * mach_bar ** 2 + 2.0) / (2.0 * (g - 1.0)) * p_max ** (1.0 - 1.0 / g)
    return AprioriBounds(speed_max=float(speed_max), p_min=float(p_min), p_max=float(p_max),
                         e_min=float(e_min), e_max=float(e_max), mach_bar=float(mach_bar))


def energy_sandwich_margins(state, gas, mach_bar=1.0):
    """Pointwise margins of the pressure-energy sandwich at Mach bound ``mach_bar``.

    Uses the pressure-form energy |u|^2/2 + p^(1-1/g)/(g-1) (the closure the
    sandwich is stated for; it coincides with E for homentropic states).
    Returns (min lower margin, min upper margin); both nonnegative means the
    sandwich holds everywhere.
    """
    g = gas.gamma
    _require_positive(state.p, "pressure")
    pw = np.power(state.p, 1.0 - 1.0 / g)
    e = 0.5 * (state.u1 ** 2 + state.u2 ** 2) + pw / (g - 1.0)
    lower = pw / (g - 1.0)
    upper = ((g - 1.0) * g * mach_bar ** 2 + 2.0) / (2.0 * (g - 1.0)) * pw
    return float(np.min(e - lower)), float(np.min(upper - e))
