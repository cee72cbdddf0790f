import numpy as np
import pytest

from nozlimit import far_field as ff
from nozlimit import geometry as geo


@pytest.fixture(scope="session")
def straight_geometry():
    return geo.NozzleGeometry2D(a=0.0, b=1.0)


@pytest.fixture(scope="session")
def straight_grid(straight_geometry):
    return geo.build_grid(straight_geometry, L=5.0, n_xi=40, n_eta=20)


@pytest.fixture(scope="session")
def uniform_upstream():
    return ff.UpstreamProfiles(2.0, 1.0)


@pytest.fixture(scope="session")
def bump_upstream():
    # B = 2 + 0.01 x (1 - x), S = 1
    return ff.UpstreamProfiles(ff.PolynomialProfile((2.0, 0.01, -0.01)), 1.0)


@pytest.fixture(scope="session")
def axisym_bump_upstream():
    # B = 2 + 0.01 r^2 (B'(0) = 0, B' >= 0)
    return ff.UpstreamProfiles(ff.PolynomialProfile((2.0, 0.0, 0.01)))


def bisect_oracle(fn, lo, hi, iters=200):
    """Plain scalar bisection for increasing fn, independent of the package."""
    a, b = float(lo), float(hi)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if fn(mid) > 0.0:
            b = mid
        else:
            a = mid
    return 0.5 * (a + b)


def l2_norm(field, grid, mask=None):
    w = grid.cell_measure if mask is None else grid.cell_measure * mask
    return float(np.sqrt(np.sum(w * np.asarray(field) ** 2)))
