"""Acceptance gate: every shipped criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS line per
criterion.  Shared sweeps are computed once per session.
"""

import json
import time

import numpy as np
import pytest

from nozlimit import cli, elliptic as ell, far_field as ff, geometry as geo
from nozlimit import limit_harness as lh, nozzle_solver as ns

from conftest import bisect_oracle


def _report(criterion, detail):
    print(f"CRITERION {criterion}: PASS - {detail}")


# ----------------------------------------------------------------------
# shared expensive fixtures
# ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def axisym_sweep():
    """Homentropic axisymmetric sweep: cylinder tapering to r0 = 0.9."""
    upstream = ff.UpstreamProfiles(ff.PolynomialProfile((2.0, 0.0, 0.01)))
    geometry = geo.NozzleGeometryAxisym(r0=0.9)
    grid = geo.build_grid(geometry, 10.0, 96, 40)
    t0 = time.perf_counter()
    report = lh.gamma_sweep("axisym", [5.0, 10.0, 20.0, 40.0, 80.0], 0.2,
                            upstream, geometry, grid)
    return report, time.perf_counter() - t0


@pytest.fixture(scope="module")
def full_euler_sweep():
    """Planar full Euler sweep with a linear entropy profile."""
    upstream = ff.UpstreamProfiles(ff.ConstantProfile(2.0),
                                   ff.PolynomialProfile((1.0, 0.01)))
    geometry = geo.NozzleGeometry2D(a=0.0, b=1.2)
    grid = geo.build_grid(geometry, 10.0, 128, 64)
    report = lh.gamma_sweep("full2d", [5.0, 10.0, 20.0, 40.0, 80.0], 0.35,
                            upstream, geometry, grid)
    return report


def _strictly_decreasing(vals):
    return all(a > b for a, b in zip(vals, vals[1:]))


# ----------------------------------------------------------------------
# criterion 1: manufactured-solution convergence
# ----------------------------------------------------------------------

def test_criterion_1_elliptic_manufactured_orders():
    t0 = time.perf_counter()

    def exact(x, y):
        return np.sin(np.pi * np.asarray(x)) * np.sin(np.pi * np.asarray(y))

    def source(x, y):
        return 2.0 * np.pi ** 2 * exact(x, y)

    def orders(geometry, L):
        errs = []
        for n in (32, 64, 128):
            grid = geo.build_grid(geometry, L, n, n)
            lo_f = geometry.lower(grid.xi_f)[0]
            w_f = geometry.width(grid.xi_f)[0]
            lo_c = geometry.lower(grid.xi_c)[0]
            w_c = geometry.width(grid.xi_c)[0]
            prob = ell.EllipticProblem(
                grid, np.ones((n, n)), source(grid.x1_c, grid.x2_c),
                west=ell.Dirichlet(exact(grid.xi_f[0], lo_f[0] + grid.eta_c * w_f[0])),
                east=ell.Dirichlet(exact(grid.xi_f[-1], lo_f[-1] + grid.eta_c * w_f[-1])),
                south=ell.Dirichlet(exact(grid.xi_c, lo_c)),
                north=ell.Dirichlet(exact(grid.xi_c, lo_c + w_c)))
            psi = ell.solve(prob, tol=1e-12)
            errs.append(ell.mms_error(exact(grid.x1_c, grid.x2_c), psi, grid)[0])
        # fitted slope of log error against log h (h halves each step)
        fit = np.polyfit(np.log([1.0, 0.5, 0.25]), np.log(errs), 1)[0]
        return fit

    flat = orders(geo.NozzleGeometry2D(0.0, 1.0), 0.5)
    mapped = orders(geo.NozzleGeometry2D(0.2, 1.2), 2.0)
    elapsed = time.perf_counter() - t0
    assert flat >= 1.9, f"flat-domain fitted order {flat:.3f} < 1.9"
    assert mapped >= 1.9, f"mapped-domain fitted order {mapped:.3f} < 1.9"
    assert elapsed < 30.0, f"manufactured-solution study took {elapsed:.1f} s"
    _report(1, f"fitted L2 orders flat={flat:.2f}, tanh-mapped={mapped:.2f} "
               f"in {elapsed:.1f} s")


# ----------------------------------------------------------------------
# criterion 2: closure-root oracles
# ----------------------------------------------------------------------

def test_criterion_2_closure_oracles():
    rng = np.random.default_rng(314159)
    worst_dev = worst_resid = worst_m = 0.0
    for k in range(1000):
        g = float(rng.uniform(1.2, 12.0))
        B = float(rng.uniform(0.5, 5.0))
        if k % 2 == 0:
            rho_smax = (2 * (g - 1) * B / (g * (g + 1))) ** (1 / (g - 1))
            phi2 = float(rng.uniform(0.0, 0.98)) * g * rho_smax ** (g + 1)
            root = ff.subsonic_root_homentropic(phi2, B, g)

            def fn(r, phi2=phi2, g=g, B=B):
                kin = phi2 / (2 * r * r) if phi2 > 0 else 0.0
                return kin + g / (g - 1) * r ** (g - 1) - B

            lo = (phi2 / g) ** (1 / (g + 1))
            hi = ((g - 1) * B / g) ** (1 / (g - 1))
            mach2 = phi2 / (g * root ** (g + 1))
        else:
            S = float(rng.uniform(0.5, 2.0))
            p_smax = (2 * S * (g - 1) * B / (g * (g + 1))) ** (g / (g - 1))
            phi2 = float(rng.uniform(0.0, 0.98)) * g * p_smax ** ((g + 1) / g) / S
            root = ff.subsonic_root_full(phi2, B, S, g)

            def fn(p, phi2=phi2, g=g, B=B, S=S):
                kin = phi2 / (2 * p ** (2 / g)) if phi2 > 0 else 0.0
                return kin + g / ((g - 1) * S) * p ** ((g - 1) / g) - B

            lo = (S * phi2 / g) ** (g / (g + 1))
            hi = ((g - 1) * S * B / g) ** (g / (g - 1))
            mach2 = S * phi2 / (g * root ** ((g + 1) / g))
        oracle = bisect_oracle(fn, lo, hi)
        worst_dev = max(worst_dev, abs(root - oracle) / abs(oracle))
        worst_resid = max(worst_resid, abs(fn(root)) / B)
        worst_m = max(worst_m, float(np.sqrt(mach2)))
    assert worst_dev <= 1e-10, f"worst oracle deviation {worst_dev:.2e}"
    assert worst_resid <= 1e-12, f"worst Bernoulli residual {worst_resid:.2e}"
    assert worst_m <= 1.0 + 1e-12, f"supersonic root: M = {worst_m}"
    _report(2, f"1000 roots: max oracle dev {worst_dev:.1e}, max residual "
               f"{worst_resid:.1e}, max Mach {worst_m:.6f}")


# ----------------------------------------------------------------------
# criterion 3: planar full Euler solve
# ----------------------------------------------------------------------

def test_criterion_3_problem1_solve():
    upstream = ff.UpstreamProfiles(ff.PolynomialProfile((2.0, 0.01, -0.01)),
                                   ff.ConstantProfile(1.0))
    geometry = geo.NozzleGeometry2D(a=0.0, b=1.0)
    grid = geo.build_grid(geometry, 10.0, 128, 64)
    m = 0.2 * ff.choking_flux(upstream, 5.0)
    t0 = time.perf_counter()
    config = ns.PicardConfig(tol_outer=1e-8, max_outer=200)
    sol = ns.solve_problem1(m, 5.0, upstream, geometry, grid, config=config)
    elapsed = time.perf_counter() - t0
    assert sol.converged
    assert sol.diagnostics["iterations"] <= 200
    assert sol.diagnostics["final_update"] < 1e-8
    assert sol.diagnostics["max_mach"] < 1.0
    stations = np.linspace(1, grid.n_xi - 1, 10).astype(int)
    fluxes = np.array([geo.section_flux(sol.state, grid, int(i)) for i in stations])
    dev = float(np.max(np.abs(fluxes - m)) / m)
    assert dev <= 1e-6, f"section-flux deviation {dev:.2e}"
    assert elapsed < 120.0, f"solve took {elapsed:.1f} s"
    _report(3, f"converged in {sol.diagnostics['iterations']} iterations, "
               f"max Mach {sol.diagnostics['max_mach']:.3f}, 10-station flux "
               f"deviation {dev:.1e}, {elapsed:.1f} s")


# ----------------------------------------------------------------------
# criteria 4 and 5: homentropic axisymmetric sweep and framework report
# ----------------------------------------------------------------------

def test_criterion_4_axisym_sweep(axisym_sweep):
    report, elapsed = axisym_sweep
    assert not report.incomplete
    dev = report.metrics["density_dev_linf"]
    assert _strictly_decreasing(dev), f"density deviation not decreasing: {dev}"
    rate = report.rates["density_dev_linf"]
    assert 0.8 <= rate <= 1.2, f"density-deviation rate {rate:.3f}"
    for q in ("lq_gap_q1", "lq_gap_q2"):
        gaps = report.metrics[q]
        assert _strictly_decreasing(gaps), f"{q} not decreasing: {gaps}"
        qrate = report.rates[q]
        assert 0.8 <= qrate <= 1.2, f"{q} rate {qrate:.3f}"
    dist = report.metrics["dist_to_reference"]
    assert _strictly_decreasing(dist), f"reference distance not decreasing: {dist}"
    assert dist[-1] <= 0.25 * dist[0], \
        f"final distance {dist[-1]:.3e} vs first {dist[0]:.3e}"
    assert elapsed < 600.0, f"sweep took {elapsed:.1f} s"
    _report(4, f"density rate {rate:.2f}, Lq rates "
               f"{report.rates['lq_gap_q1']:.2f}/{report.rates['lq_gap_q2']:.2f}, "
               f"reference distance shrank {dist[0] / dist[-1]:.1f}x, "
               f"{elapsed:.1f} s")


def test_criterion_5_framework_conditions(axisym_sweep):
    report, _ = axisym_sweep
    c = report.conditions
    assert c is not None
    assert c.mach_bar == 1.0
    assert c.a1_pass, f"A1 failed: sup Mach {max(c.sup_mach)}"
    assert c.a3_ratio <= 3.0, f"TV ratio {c.a3_ratio:.3f}"
    h_vals = [abs(v) for v in c.log_energy_over_gamma]
    f_vals = [abs(v) for v in c.log_pressure_over_gamma]
    assert _strictly_decreasing(h_vals), f"|ln E|/gamma not decreasing: {h_vals}"
    assert _strictly_decreasing(f_vals), f"|ln p|/gamma not decreasing: {f_vals}"
    assert h_vals[0] / h_vals[-1] >= 4.0, f"|ln E|/gamma shrank {h_vals[0]/h_vals[-1]:.2f}x"
    assert f_vals[0] / f_vals[-1] >= 4.0, f"|ln p|/gamma shrank {f_vals[0]/f_vals[-1]:.2f}x"
    assert c.sandwich_pass, (f"energy sandwich violated: margins "
                             f"{min(c.sandwich_lower_margin)}, "
                             f"{min(c.sandwich_upper_margin)}")
    assert c.jensen_pass
    assert all(v == 1.0 for v in report.metrics["jensen_ok"])
    _report(5, f"A1 ok (sup M {max(c.sup_mach):.3f}), TV ratio {c.a3_ratio:.2f}, "
               f"|ln E|/g shrank {h_vals[0]/h_vals[-1]:.1f}x, |ln p|/g "
               f"{f_vals[0]/f_vals[-1]:.1f}x, sandwich and Jensen hold")


# ----------------------------------------------------------------------
# criterion 6: full Euler sweep
# ----------------------------------------------------------------------

def test_criterion_6_full_euler_sweep(full_euler_sweep):
    report = full_euler_sweep
    assert not report.incomplete
    ident = report.metrics["rho_minus_entropy_l1"]
    assert _strictly_decreasing(ident), f"rho vs entropy not decreasing: {ident}"
    rate = report.rates["rho_minus_entropy_l1"]
    assert 0.8 <= rate <= 1.2, f"identification rate {rate:.3f}"
    divu = report.metrics["res_limit_divu"]
    assert _strictly_decreasing(divu), f"limit div residual not decreasing: {divu}"
    incomp = report.metrics["incompressibility"]
    assert max(incomp) <= 1e-9, f"incompressibility functional {max(incomp):.2e}"
    _report(6, f"rho-vs-entropy rate {rate:.2f}, limit div-residual shrank "
               f"{divu[0] / divu[-1]:.1f}x, incompressibility <= {max(incomp):.1e}")


# ----------------------------------------------------------------------
# criterion 7: div-curl commutation diagnostic
# ----------------------------------------------------------------------

def test_criterion_7_divcurl():
    t0 = time.perf_counter()
    out = lh.divcurl_diagnostic([4, 8, 16, 32, 64], n_cells=1024)
    elapsed = time.perf_counter() - t0
    worst = max(out["compliant"])
    assert worst <= 1e-10, f"compliant defect {worst:.2e}"
    gap = abs(out["violating"][-1] - out["analytic_violating"])
    assert gap <= 1e-2, f"violating defect off analytic value by {gap:.2e}"
    assert elapsed < 5.0, f"diagnostic took {elapsed:.1f} s"
    _report(7, f"compliant defect {worst:.1e}, violating defect within "
               f"{gap:.1e} of (1/2) int(phi), {elapsed:.2f} s")


# ----------------------------------------------------------------------
# criterion 8: wall-trace refinement
# ----------------------------------------------------------------------

def test_criterion_8_normal_trace_refinement():
    upstream = ff.UpstreamProfiles(ff.ConstantProfile(2.0), ff.ConstantProfile(1.0))
    geometry = geo.NozzleGeometry2D(a=0.0, b=1.2)
    traces = []
    for n_xi, n_eta in ((64, 32), (128, 64), (256, 128)):
        grid = geo.build_grid(geometry, 10.0, n_xi, n_eta)
        sol = ns.solve_problem1(0.3, 5.0, upstream, geometry, grid)
        traces.append(lh.normal_trace(sol.state, grid).value)
    ratios = [traces[i + 1] / traces[i] for i in range(2)]
    for r in ratios:
        assert 0.4 <= r <= 0.6, f"trace refinement ratios {ratios}"
    _report(8, f"wall traces {traces[0]:.2e} -> {traces[1]:.2e} -> "
               f"{traces[2]:.2e}, halving ratios "
               f"{ratios[0]:.2f}, {ratios[1]:.2f}")


# ----------------------------------------------------------------------
# criterion 9: determinism
# ----------------------------------------------------------------------

def test_criterion_9_determinism(tmp_path):
    cfg = {
        "schema_version": 1,
        "problem": "axisym",
        "geometry": {"r0": 0.9, "L": 5.0},
        "grid": {"n_xi": 48, "n_eta": 24},
        "gas": {"gammas": [5.0, 10.0, 20.0]},
        "m": 0.2,
        "upstream": {"B": {"kind": "poly", "coeffs": [2.0, 0.0, 0.01]}},
        "threads": 1,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        code = cli.main(["sweep", "--config", str(path), "--out", str(out),
                         "--threads", "1"])
        assert code == 0
        outs.append(out)
    csv_a = (outs[0] / "metrics.csv").read_bytes()
    csv_b = (outs[1] / "metrics.csv").read_bytes()
    rep_a = (outs[0] / "report.json").read_bytes()
    rep_b = (outs[1] / "report.json").read_bytes()
    assert csv_a == csv_b, "metrics.csv differs between identical runs"
    assert rep_a == rep_b, "report.json differs between identical runs"
    _report(9, f"repeated sweep byte-identical ({len(csv_a)} CSV bytes, "
               f"{len(rep_a)} JSON bytes)")
