import numpy as np
import pytest

from nozlimit import core, far_field as ff
from nozlimit.core import FlowState, GasKind, GasModel
from nozlimit.errors import ClosureDomainError


def make_state(grid, rho, u1, u2, p):
    shape = (grid.n_eta, grid.n_xi)
    full = lambda v: np.full(shape, float(v))
    return FlowState(rho=full(rho), u1=full(u1), u2=full(u2), p=full(p), grid=grid)


class TestMachNumber:
    def test_zero_velocity(self, straight_grid):
        gas = GasModel(GasKind.FULL_EULER, 2.0)
        st = make_state(straight_grid, 1.0, 0.0, 0.0, 1.0)
        assert np.all(core.mach_number(st, gas) == 0.0)

    def test_sonic_full_euler(self, straight_grid):
        gas = GasModel(GasKind.FULL_EULER, 2.0)
        st = make_state(straight_grid, 1.0, np.sqrt(2.0), 0.0, 1.0)
        np.testing.assert_allclose(core.mach_number(st, gas), 1.0, rtol=1e-14)

    def test_sonic_homentropic(self, straight_grid):
        gas = GasModel(GasKind.HOMENTROPIC, 3.0)
        st = make_state(straight_grid, 1.0, np.sqrt(3.0), 0.0, 1.0)
        np.testing.assert_allclose(core.mach_number(st, gas), 1.0, rtol=1e-14)

    def test_matches_speed_over_sonic(self, straight_grid):
        rng = np.random.default_rng(7)
        shape = (straight_grid.n_eta, straight_grid.n_xi)
        for gas in (GasModel(GasKind.FULL_EULER, 1.7), GasModel(GasKind.HOMENTROPIC, 2.3)):
            st = FlowState(rho=rng.uniform(0.5, 2.0, shape), u1=rng.normal(size=shape),
                           u2=rng.normal(size=shape), p=rng.uniform(0.5, 2.0, shape),
                           grid=straight_grid)
            m = core.mach_number(st, gas)
            np.testing.assert_allclose(m, st.speed / core.sonic_speed(st, gas), rtol=1e-14)

    def test_nonpositive_pressure_reports_cell(self, straight_grid):
        gas = GasModel(GasKind.FULL_EULER, 2.0)
        st = make_state(straight_grid, 1.0, 1.0, 0.0, 1.0)
        st.p[3, 7] = -0.5
        with pytest.raises(ClosureDomainError) as err:
            core.mach_number(st, gas)
        assert err.value.cell == (3, 7)
        assert err.value.value == -0.5


class TestBernoulliEnergy:
    def test_full_euler_rest_state(self, straight_grid):
        gas = GasModel(GasKind.FULL_EULER, 2.0)
        st = make_state(straight_grid, 1.0, 0.0, 0.0, 1.0)
        assert np.all(core.bernoulli(st, gas) == 2.0)
        assert np.all(core.total_energy(st, gas) == 1.0)

    def test_homentropic_direct(self, straight_grid):
        gas = GasModel(GasKind.HOMENTROPIC, 2.0)
        st = make_state(straight_grid, 2.0, 2.0, 0.0, 4.0)
        assert np.all(core.bernoulli(st, gas) == 6.0)

    def test_homentropic_stagnation(self, straight_grid):
        for g in (1.4, 2.0, 5.0):
            gas = GasModel(GasKind.HOMENTROPIC, g)
            st = make_state(straight_grid, 1.0, 0.0, 0.0, 1.0)
            np.testing.assert_allclose(core.bernoulli(st, gas), g / (g - 1.0), rtol=1e-15)

    def test_b_minus_e_identity(self, straight_grid):
        rng = np.random.default_rng(11)
        shape = (straight_grid.n_eta, straight_grid.n_xi)
        gas = GasModel(GasKind.FULL_EULER, 2.7)
        st = FlowState(rho=rng.uniform(0.5, 2.0, shape), u1=rng.normal(size=shape),
                       u2=rng.normal(size=shape), p=rng.uniform(0.5, 2.0, shape),
                       grid=straight_grid)
        lhs = core.bernoulli(st, gas) - core.total_energy(st, gas)
        np.testing.assert_allclose(lhs, st.p / st.rho, rtol=1e-14)

    def test_zero_density_fatal(self, straight_grid):
        gas = GasModel(GasKind.FULL_EULER, 2.0)
        st = make_state(straight_grid, 1.0, 0.0, 0.0, 1.0)
        st.rho[0, 0] = 0.0
        with pytest.raises(ClosureDomainError):
            core.bernoulli(st, gas)


class TestEntropy:
    def test_unit(self, straight_grid):
        gas = GasModel(GasKind.FULL_EULER, 1.9)
        st = make_state(straight_grid, 1.0, 0.0, 0.0, 1.0)
        assert np.all(core.entropy(st, gas) == 1.0)

    def test_scaling(self, straight_grid):
        for g in (1.4, 3.0):
            gas = GasModel(GasKind.FULL_EULER, g)
            st = make_state(straight_grid, 2.0, 0.0, 0.0, 1.0)
            np.testing.assert_allclose(core.entropy(st, gas), 2.0, rtol=1e-15)

    def test_quarter_root(self, straight_grid):
        gas = GasModel(GasKind.FULL_EULER, 4.0)
        st = make_state(straight_grid, 2.0, 0.0, 0.0, 16.0)
        np.testing.assert_allclose(core.entropy(st, gas), 1.0, rtol=1e-14)

    def test_homentropic_identically_one(self, straight_grid):
        gas = GasModel(GasKind.HOMENTROPIC, 2.0)
        st = make_state(straight_grid, 1.37, 0.0, 0.0, 1.37 ** 2)
        assert np.all(core.entropy(st, gas) == 1.0)


class TestAprioriBounds:
    def test_speed_bound(self):
        up = ff.UpstreamProfiles(2.0)
        gas = GasModel(GasKind.HOMENTROPIC, 3.0)
        b = core.apriori_bounds(3.0, up, gas)
        np.testing.assert_allclose(b.speed_max, np.sqrt(2.0), rtol=1e-15)

    def test_pressure_sandwich(self):
        up = ff.UpstreamProfiles(1.0, 1.0)
        gas = GasModel(GasKind.FULL_EULER, 2.0)
        b = core.apriori_bounds(2.0, up, gas)
        np.testing.assert_allclose(b.p_min, 1.0 / 9.0, rtol=1e-15)
        np.testing.assert_allclose(b.p_max, 0.25, rtol=1e-15)

    def test_speed_asymptote_stiff_gas(self):
        # verified closed form: sqrt(2 (g-1)/(g+1) * 2) -> 2 as gamma grows
        up = ff.UpstreamProfiles(2.0)
        gas = GasModel(GasKind.HOMENTROPIC, 2.0)
        prev = 0.0
        for g in (10.0, 100.0, 1e4, 1e6):
            s = core.apriori_bounds(g, up, gas).speed_max
            assert s > prev
            prev = s
        assert abs(prev - 2.0) < 1e-5

    def test_monotone_in_b_max(self):
        gas = GasModel(GasKind.HOMENTROPIC, 2.0)
        speeds = [core.apriori_bounds(2.0, ff.UpstreamProfiles(c), gas).speed_max
                  for c in (1.0, 1.5, 2.0, 4.0)]
        assert all(a < b for a, b in zip(speeds, speeds[1:]))


class TestEnergySandwich:
    def test_holds_for_subsonic_closure_states(self, straight_grid):
        # states built from the subsonic closure satisfy the pressure-energy
        # sandwich at mach_bar = 1
        rng = np.random.default_rng(3)
        shape = (straight_grid.n_eta, straight_grid.n_xi)
        g = 2.5
        gas = GasModel(GasKind.HOMENTROPIC, g)
        B = rng.uniform(1.0, 3.0, shape)
        rho_smax = (2.0 * (g - 1.0) * B / (g * (g + 1.0))) ** (1.0 / (g - 1.0))
        phi2 = rng.uniform(0.0, 0.95, shape) * g * rho_smax ** (g + 1.0)
        rho = ff.subsonic_root_homentropic(phi2, B, g)
        speed = np.sqrt(phi2) / rho
        st = FlowState(rho=rho, u1=speed, u2=np.zeros(shape), p=rho ** g,
                       grid=straight_grid)
        lo, hi = core.energy_sandwich_margins(st, gas, mach_bar=1.0)
        assert lo >= -1e-14
        assert hi >= -1e-14

    def test_gamma_validation(self):
        with pytest.raises(ClosureDomainError):
            GasModel(GasKind.HOMENTROPIC, 1.0)
