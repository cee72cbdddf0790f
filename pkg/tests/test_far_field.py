import numpy as np
import pytest
from scipy.optimize import brentq

from nozlimit import far_field as ff, geometry as geo, core
from nozlimit.errors import ChokedFlowError, ClosureDomainError, FarFieldError

from conftest import bisect_oracle


class TestHomentropicRoot:
    def test_stagnation(self):
        assert ff.subsonic_root_homentropic(0.0, 4.0, 2.0) == pytest.approx(2.0, rel=1e-14)

    def test_constructed_sonic_case(self):
        rho = ff.subsonic_root_homentropic(2.0, 3.0, 2.0)
        # double root at the sonic point: location accurate to sqrt(eps),
        # residual and Mach still at their contract levels
        assert abs(rho - 1.0) < 1e-7
        resid = 2.0 / (2 * rho ** 2) + 2.0 * rho - 3.0
        assert abs(resid) <= 1e-12 * 3.0
        mach2 = 2.0 / (2.0 * rho ** 3)
        assert mach2 <= 1.0 + 1e-12

    def test_cubic_case_vs_oracle(self):
        # root of 2 rho^3 - 3 rho^2 + 1/2 = 0 on the subsonic branch
        rho = ff.subsonic_root_homentropic(1.0, 3.0, 2.0)
        oracle = brentq(lambda r: 2 * r ** 3 - 3 * r ** 2 + 0.5, 0.7937, 1.5,
                        xtol=1e-15, rtol=8.9e-16)
        assert rho == pytest.approx(oracle, rel=1e-12)
        assert abs(2 * rho ** 3 - 3 * rho ** 2 + 0.5) < 1e-13

    def test_random_roots_against_bisection(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            g = rng.uniform(1.2, 10.0)
            B = rng.uniform(0.5, 4.0)
            rho_smax = (2 * (g - 1) * B / (g * (g + 1))) ** (1 / (g - 1))
            phi2 = rng.uniform(0.0, 0.97) * g * rho_smax ** (g + 1)
            rho = ff.subsonic_root_homentropic(phi2, B, g)
            fn = lambda r: phi2 / (2 * r * r) + g / (g - 1) * r ** (g - 1) - B
            lo = (phi2 / g) ** (1 / (g + 1))
            hi = ((g - 1) * B / g) ** (1 / (g - 1))
            oracle = bisect_oracle(fn, lo, hi)
            assert rho == pytest.approx(oracle, rel=1e-10)
            assert abs(fn(rho)) <= 1e-12 * B
            assert phi2 / (g * rho ** (g + 1)) <= 1.0 + 1e-12  # M <= 1

    def test_vectorized_matches_scalar(self):
        phi2 = np.array([0.0, 0.3, 0.7])
        B = np.array([2.0, 2.5, 3.0])
        roots = ff.subsonic_root_homentropic(phi2, B, 2.0)
        for k in range(3):
            assert roots[k] == pytest.approx(
                ff.subsonic_root_homentropic(phi2[k], B[k], 2.0), rel=1e-14)

    def test_choked_raises_with_margin(self):
        with pytest.raises(ChokedFlowError) as err:
            ff.subsonic_root_homentropic(50.0, 1.0, 2.0)
        assert err.value.margin > 0.0

    def test_negative_phi2_rejected(self):
        with pytest.raises(ClosureDomainError):
            ff.subsonic_root_homentropic(-1.0, 2.0, 2.0)


class TestFullEulerRoot:
    def test_stagnation(self):
        assert ff.subsonic_root_full(0.0, 2.0, 1.0, 2.0) == pytest.approx(1.0, rel=1e-14)

    def test_case_vs_oracle(self):
        g, phi2, B, S = 3.0, 0.5, 2.0, 1.2
        p = ff.subsonic_root_full(phi2, B, S, g)
        fn = lambda q: phi2 / (2 * q ** (2 / g)) + g * q ** ((g - 1) / g) / ((g - 1) * S) - B
        lo = (S * phi2 / g) ** (g / (g + 1))
        hi = ((g - 1) * S * B / g) ** (g / (g - 1))
        oracle = brentq(fn, lo, hi, xtol=1e-15, rtol=8.9e-16)
        assert p == pytest.approx(oracle, rel=1e-12)

    def test_always_subsonic(self):
        rng = np.random.default_rng(9)
        for _ in range(300):
            g = rng.uniform(1.2, 10.0)
            B = rng.uniform(0.5, 4.0)
            S = rng.uniform(0.5, 2.0)
            p_smax = (2 * S * (g - 1) * B / (g * (g + 1))) ** (g / (g - 1))
            phi2 = rng.uniform(0.0, 0.97) * g * p_smax ** ((g + 1) / g) / S
            p = ff.subsonic_root_full(phi2, B, S, g)
            mach2 = S * phi2 / (g * p ** ((g + 1) / g))
            assert mach2 <= 1.0 + 1e-12
            fn = lambda q: phi2 / (2 * q ** (2 / g)) \
                + g * q ** ((g - 1) / g) / ((g - 1) * S) - B
            assert abs(fn(p)) <= 1e-12 * B


class TestFarFieldFullEuler:
    def test_zero_flux_limit_is_stagnation(self, uniform_upstream):
        st = ff.far_field_full_euler(1e-10, uniform_upstream, 2.0)
        assert st.constant == pytest.approx(1.0, abs=1e-6)

    def test_constant_profile_vs_closed_form(self, uniform_upstream):
        # constant B = 2, S = 1, gamma = 2: flux(p) = 2 sqrt(p) sqrt(1 - sqrt(p))
        m = 0.1
        st = ff.far_field_full_euler(m, uniform_upstream, 2.0)
        oracle = brentq(lambda p: 2 * np.sqrt(p) * np.sqrt(1 - np.sqrt(p)) - m,
                        0.5, 1.0 - 1e-14, xtol=1e-14, rtol=8.9e-16)
        assert st.constant == pytest.approx(oracle, rel=1e-10)

    def test_psi_total_equals_flux_for_unit_entropy(self, uniform_upstream):
        st = ff.far_field_full_euler(0.1, uniform_upstream, 2.0)
        assert st.psi_total == pytest.approx(0.1, rel=1e-9)

    def test_monotone_in_m(self, uniform_upstream):
        ps = [ff.far_field_full_euler(m, uniform_upstream, 2.0).constant
              for m in (0.05, 0.1, 0.2, 0.4)]
        assert all(a > b for a, b in zip(ps, ps[1:]))

    def test_choking_rejected(self, uniform_upstream):
        m_hat = ff.choking_flux(uniform_upstream, 2.0)
        with pytest.raises(ChokedFlowError):
            ff.far_field_full_euler(m_hat * 1.01, uniform_upstream, 2.0)

    def test_flux_below_floor_rejected(self):
        up = ff.UpstreamProfiles(ff.ConstantProfile(2.0), ff.PolynomialProfile((1.0, 0.01)))
        with pytest.raises(FarFieldError):
            ff.far_field_full_euler(1e-4, up, 5.0)

    def test_label_inverse_identity(self, bump_upstream):
        st = ff.far_field_full_euler(0.25, bump_upstream, 5.0)
        x = np.linspace(0.0, 1.0, 2001)
        err = np.max(np.abs(st.label(st.psi(x)) - x))
        assert err < 1e-10

    def test_velocity_positive(self, bump_upstream):
        st = ff.far_field_full_euler(0.25, bump_upstream, 5.0)
        x = np.linspace(0.0, 1.0, 501)
        assert np.all(st.velocity(x) > 0.0)


class TestFarFieldAxisym:
    def test_zero_flux_limit(self, uniform_upstream):
        up = ff.UpstreamProfiles(2.0)
        st = ff.far_field_axisym(1e-10, up, 2.0)
        assert st.constant == pytest.approx(1.0, abs=1e-6)

    def test_vs_closed_form(self):
        up = ff.UpstreamProfiles(2.0)
        m = 0.05
        st = ff.far_field_axisym(m, up, 2.0)
        # flux(rho) = 0.5 rho sqrt(4(1 - rho)) = rho sqrt(1 - rho)
        oracle = brentq(lambda r: r * np.sqrt(1.0 - r) - m, 0.6, 1.0 - 1e-14,
                        xtol=1e-14, rtol=8.9e-16)
        assert st.constant == pytest.approx(oracle, rel=1e-10)

    def test_psi_total_is_m(self, axisym_bump_upstream):
        st = ff.far_field_axisym(0.2, axisym_bump_upstream, 5.0)
        assert st.psi_total == pytest.approx(0.2, rel=1e-9)

    def test_velocity_positive(self, axisym_bump_upstream):
        st = ff.far_field_axisym(0.2, axisym_bump_upstream, 5.0)
        r = np.linspace(0.0, 1.0, 501)
        assert np.all(st.velocity(r) > 0.0)


class TestProfileRepresentation:
    def test_chebyshev_table_shape(self, bump_upstream):
        assert bump_upstream.table_x.shape == (257,)
        assert bump_upstream.table_x[0] == 0.0
        assert bump_upstream.table_x[-1] == 1.0

    def test_cubic_interpolation_of_table_matches_closed_form(self, bump_upstream):
        x = np.linspace(0.0, 1.0, 997)
        np.testing.assert_allclose(bump_upstream.b_interp(x), bump_upstream.b(x),
                                   rtol=1e-10, atol=1e-12)

    def test_bare_callable_gets_spectral_derivative(self):
        up = ff.UpstreamProfiles(lambda x: 2.0 + 0.05 * np.sin(3.0 * x))
        x = np.linspace(0.05, 0.95, 101)
        np.testing.assert_allclose(up.db(x), 0.15 * np.cos(3.0 * x), atol=1e-9)

    def test_nonpositive_bernoulli_rejected(self):
        with pytest.raises(FarFieldError):
            ff.UpstreamProfiles(ff.PolynomialProfile((0.1, -0.2)))


class TestIncompressibleFarField:
    def test_uniform(self):
        up = ff.UpstreamProfiles(2.0)
        st = ff.far_field_incompressible(0.3, up, axisym=False)
        np.testing.assert_allclose(st.velocity([0.2, 0.8]), 0.3, rtol=1e-10)
        assert st.psi_total == pytest.approx(0.3, rel=1e-12)

    def test_axisym_flux(self):
        up = ff.UpstreamProfiles(2.0)
        st = ff.far_field_incompressible(0.2, up, axisym=True)
        # m = int u r dr = u / 2
        np.testing.assert_allclose(st.velocity(0.5), 0.4, rtol=1e-10)


class TestInletFluxConsistency:
    def test_full_euler_inlet_state_flux(self, bump_upstream):
        m = 0.25
        far = ff.far_field_full_euler(m, bump_upstream, 5.0)
        g2d = geo.NozzleGeometry2D(a=0.0, b=1.0)
        grid = geo.build_grid(g2d, 10.0, 16, 256)
        eta = grid.eta_c[:, None]
        shape = (grid.n_eta, grid.n_xi)
        u1 = np.broadcast_to(far.velocity(grid.eta_c)[:, None], shape)
        rho = np.broadcast_to(far.density(grid.eta_c)[:, None], shape)
        p = np.full(shape, far.constant)
        st = core.FlowState(rho=rho.copy(), u1=u1.copy(), u2=np.zeros(shape),
                            p=p, grid=grid)
        flux = geo.section_flux(st, grid, 8)
        assert flux == pytest.approx(m, rel=2e-5)  # midpoint quadrature accuracy
