"""Configuration ingestion, run orchestration, persistence, and SVG plots.

Subcommands: solve | sweep | check | report.  Exit codes: 0 success,
2 config/schema violation, 3 solver breakdown, 4 incomplete sweep,
5 fitted rate outside the configured bracket, 6 diagnostic resolution error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import core, elliptic, far_field as ff, geometry as geo
from . import limit_harness as lh, nozzle_solver as ns
from .errors import (ChokedFlowError, ConfigError, FarFieldError,
                     LinearSolverError, NozlimitError, PicardBreakdownError,
                     ResolutionError, SolverStateError)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BREAKDOWN = 3
EXIT_INCOMPLETE = 4
EXIT_RATE = 5
EXIT_RESOLUTION = 6


# ----------------------------------------------------------------------
# config parsing
# ----------------------------------------------------------------------

def _expect_keys(d, path, required, optional=()):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise ConfigError(f"{path}: missing keys {sorted(missing)}")


def _profile_from_spec(spec, path):
    if isinstance(spec, (int, float)):
        return ff.ConstantProfile(float(spec))
    _expect_keys(spec, path, required=("kind",),
                 optional=("c", "coeffs", "base", "delta", "center", "width"))
    kind = spec["kind"]
    if kind == "constant":
        _expect_keys(spec, path, required=("kind", "c"))
        return ff.ConstantProfile(float(spec["c"]))
    if kind == "poly":
        _expect_keys(spec, path, required=("kind", "coeffs"))
        coeffs = tuple(float(c) for c in spec["coeffs"])
        if not coeffs:
            raise ConfigError(f"{path}: poly needs at least one coefficient")
        return ff.PolynomialProfile(coeffs)
    if kind == "tanh_step":
        _expect_keys(spec, path, required=("kind", "base", "delta"),
                     optional=("center", "width"))
        return ff.TanhStepProfile(base=float(spec["base"]), delta=float(spec["delta"]),
                                  center=float(spec.get("center", 0.5)),
                                  width=float(spec.get("width", 0.2)))
    raise ConfigError(f"{path}: unknown profile kind {kind!r}")


class RunConfig:
    """Validated run configuration (strict schema, unknown keys rejected)."""

    def __init__(self, raw):
        _expect_keys(raw, "config",
                     required=("schema_version", "problem", "geometry", "grid",
                               "gas", "m", "upstream"),
                     optional=("solver", "harness", "check", "output_dir", "threads"))
        if raw["schema_version"] != SCHEMA_VERSION:
            raise ConfigError(f"schema_version must be {SCHEMA_VERSION}")
        self.raw = raw
        self.problem = raw["problem"]
        if self.problem not in ("full2d", "axisym"):
            raise ConfigError("problem must be 'full2d' or 'axisym'")

        gspec = raw["geometry"]
        if self.problem == "full2d":
            _expect_keys(gspec, "geometry", required=("a", "b"), optional=("L",))
            self.geometry = geo.NozzleGeometry2D(a=float(gspec["a"]), b=float(gspec["b"]))
        else:
            _expect_keys(gspec, "geometry", required=("r0",), optional=("L",))
            self.geometry = geo.NozzleGeometryAxisym(r0=float(gspec["r0"]))
        # default truncation: the tanh transition is complete to ~1e-8 there
        self.L = float(gspec.get("L", 10.0))
        if self.L <= 0:
            raise ConfigError("geometry.L must be positive")

        grid = raw["grid"]
        _expect_keys(grid, "grid", required=("n_xi", "n_eta"))
        self.n_xi, self.n_eta = int(grid["n_xi"]), int(grid["n_eta"])
        if self.n_xi < 4 or self.n_eta < 4:
            raise ConfigError("grid.n_xi and grid.n_eta must be at least 4")

        gas = raw["gas"]
        _expect_keys(gas, "gas", required=(), optional=("gamma", "gammas"))
        if ("gamma" in gas) == ("gammas" in gas):
            raise ConfigError("gas: give exactly one of 'gamma' or 'gammas'")
        if "gamma" in gas:
            self.gamma = float(gas["gamma"])
            self.gammas = None
            if self.gamma <= 1.0:
                raise ConfigError("gamma must exceed 1")
        else:
            self.gammas = [float(g) for g in gas["gammas"]]
            self.gamma = None
            if len(self.gammas) < 2:
                raise ConfigError("gas.gammas needs at least 2 entries")
            if any(g <= 1.0 for g in self.gammas):
                raise ConfigError("gamma must exceed 1")
            if sorted(self.gammas) != self.gammas or len(set(self.gammas)) != len(self.gammas):
                raise ConfigError("gas.gammas must be strictly increasing")

        m = raw["m"]
        if isinstance(m, dict):
            _expect_keys(m, "m", required=("choking_fraction",))
            self.choking_fraction = float(m["choking_fraction"])
            if not 0.0 < self.choking_fraction < 1.0:
                raise ConfigError("m.choking_fraction must lie in (0, 1)")
            self.m = None
        else:
            self.m = float(m)
            self.choking_fraction = None
            if self.m <= 0.0:
                raise ConfigError("m must be positive")

        up = raw["upstream"]
        _expect_keys(up, "upstream", required=("B",), optional=("S",))
        b_prof = _profile_from_spec(up["B"], "upstream.B")
        s_prof = _profile_from_spec(up["S"], "upstream.S") if "S" in up else None
        if self.problem == "axisym" and s_prof is not None:
            raise ConfigError("axisym problem is homentropic; drop upstream.S")
        try:
            self.upstream = ff.UpstreamProfiles(b_prof, s_prof)
        except FarFieldError as exc:
            raise ConfigError(str(exc)) from exc

        sol = raw.get("solver", {})
        _expect_keys(sol, "solver", required=(),
                     optional=("theta", "max_outer", "tol_outer", "tol_linear",
                               "max_linear_iter", "dc_max", "max_theta_halvings"))
        self.solver = ns.PicardConfig(**{k: v for k, v in sol.items()})
        if not 0.0 < self.solver.theta <= 1.0:
            raise ConfigError("solver.theta must lie in (0, 1]")

        har = raw.get("harness", {})
        _expect_keys(har, "harness", required=(),
                     optional=("core_fraction", "q_list", "n_centers", "scales",
                               "rate_bracket", "rate_metric", "mach_bar"))
        self.core_fraction = float(har.get("core_fraction", 0.5))
        self.q_list = tuple(float(q) for q in har.get("q_list", (1.0, 2.0)))
        self.n_centers = int(har.get("n_centers", 4))
        self.scales = tuple(float(s) for s in har.get("scales", (0.45, 0.3, 0.18)))
        self.rate_bracket = tuple(float(x) for x in har.get("rate_bracket", (0.8, 1.2)))
        self.rate_metric = har.get("rate_metric", "density_dev_linf")
        self.mach_bar = float(har.get("mach_bar", 1.0))
        if self.rate_metric not in lh.RATE_METRICS:
            raise ConfigError(f"harness.rate_metric must be one of {lh.RATE_METRICS}")

        chk = raw.get("check", {})
        _expect_keys(chk, "check", required=(),
                     optional=("suites", "divcurl_cells", "divcurl_n", "mms_grids"))
        self.check_suites = list(chk.get("suites", ["mms", "divcurl", "closure"]))
        self.divcurl_cells = int(chk.get("divcurl_cells", 1024))
        self.divcurl_n = [int(n) for n in chk.get("divcurl_n", [4, 16, 64])]
        self.mms_grids = [int(n) for n in chk.get("mms_grids", [32, 64])]

        self.output_dir = raw.get("output_dir")
        self.threads = int(raw.get("threads", 1))
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    @classmethod
    def load(cls, path):
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls(raw)

    def build_grid(self):
        return geo.build_grid(self.geometry, self.L, self.n_xi, self.n_eta)

    def resolve_m(self, gamma):
        if self.m is not None:
            return self.m
        m_hat = ff.choking_flux(self.upstream, gamma,
                                axisym=(self.problem == "axisym"))
        return self.choking_fraction * m_hat

    def hash(self):
        return hashlib.sha256(canonical_json(self.raw).encode()).hexdigest()


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _fmt17(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _json_dump(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


# ----------------------------------------------------------------------
# field files
# ----------------------------------------------------------------------

def write_field(directory, name, array, grid_params, config_sha):
    """Row-major little-endian float64 payload plus a JSON sidecar."""
    directory = Path(directory)
    arr = np.ascontiguousarray(np.asarray(array, dtype="<f8"))
    (directory / f"{name}.bin").write_bytes(arr.tobytes())
    sidecar = {"field": name, "shape": list(arr.shape), "dtype": "<f8",
               "order": "C", "grid": grid_params, "config_sha256": config_sha}
    _json_dump(directory / f"{name}.json", sidecar)


def read_field(directory, name):
    directory = Path(directory)
    sidecar = json.loads((directory / f"{name}.json").read_text())
    payload = (directory / f"{name}.bin").read_bytes()
    shape = tuple(sidecar["shape"])
    expect = 8 * int(np.prod(shape))
    if len(payload) != expect:
        raise ConfigError(f"field {name}: payload is {len(payload)} bytes, "
                          f"expected {expect}")
    return np.frombuffer(payload, dtype="<f8").reshape(shape).copy(), sidecar


# ----------------------------------------------------------------------
# solve
# ----------------------------------------------------------------------

def _grid_params(cfg):
    gspec = dict(cfg.raw["geometry"])
    gspec.update({"n_xi": cfg.n_xi, "n_eta": cfg.n_eta})
    return gspec


def run_solve(config_path, out_dir=None, threads=None):
    cfg = RunConfig.load(config_path)
    if cfg.gamma is None:
        raise ConfigError("solve needs a scalar gas.gamma (gammas is for sweeps)")
    out = Path(out_dir or cfg.output_dir or "run_solve")
    out.mkdir(parents=True, exist_ok=True)
    sha = cfg.hash()
    _json_dump(out / "config.json", cfg.raw)
    grid = cfg.build_grid()
    m = cfg.resolve_m(cfg.gamma)
    try:
        if cfg.problem == "full2d":
            sol = ns.solve_problem1(m, cfg.gamma, cfg.upstream, cfg.geometry, grid,
                                    config=cfg.solver)
        else:
            sol = ns.solve_problem2(m, cfg.gamma, cfg.upstream, cfg.geometry, grid,
                                    config=cfg.solver)
    except (PicardBreakdownError, ChokedFlowError, FarFieldError,
            LinearSolverError, SolverStateError) as exc:
        diag = {"error": str(exc), "type": type(exc).__name__,
                "history": getattr(exc, "history", [])}
        _json_dump(out / "breakdown.json", diag)
        print(f"solver breakdown: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN, out

    gp = _grid_params(cfg)
    st = sol.state
    for name, arr in [("rho", st.rho), ("u1", st.u1), ("u2", st.u2), ("p", st.p),
                      ("psi", sol.psi), ("mach", sol.derived.mach),
                      ("vorticity", sol.derived.vorticity)]:
        write_field(out, name, arr, gp, sha)
    bounds = core.apriori_bounds(cfg.gamma, cfg.upstream, sol.gas)
    summary = {
        "config_sha256": sha,
        "problem": cfg.problem,
        "gamma": cfg.gamma,
        "m": m,
        "psi_total": sol.far.psi_total,
        "far_field_constant": sol.far.constant,
        "diagnostics": sol.diagnostics,
        "history": sol.history,
        "bounds": {"speed_max": bounds.speed_max, "p_min": bounds.p_min,
                   "p_max": bounds.p_max, "e_min": bounds.e_min,
                   "e_max": bounds.e_max},
    }
    _json_dump(out / "summary.json", summary)
    return EXIT_OK, out


# ----------------------------------------------------------------------
# sweep
# ----------------------------------------------------------------------

def _conditions_dict(c):
    if c is None:
        return None
    return {
        "gammas": c.gammas, "mach_bar": c.mach_bar, "sup_mach": c.sup_mach,
        "a1_pass": c.a1_pass, "l1_speed_sq": c.l1_speed_sq,
        "l1_pressure": c.l1_pressure, "a2_finite": c.a2_finite,
        "tv_vorticity": c.tv_vorticity, "a3_ratio": c.a3_ratio,
        "log_energy_over_gamma": c.log_energy_over_gamma,
        "log_pressure_over_gamma": c.log_pressure_over_gamma,
        "h_first_to_last": c.h_first_to_last,
        "f1_first_to_last": c.f1_first_to_last,
        "entropy_cauchy_l1": c.entropy_cauchy_l1,
        "sandwich_lower_margin": c.sandwich_lower_margin,
        "sandwich_upper_margin": c.sandwich_upper_margin,
        "sandwich_pass": c.sandwich_pass, "jensen_pass": c.jensen_pass,
    }


def write_metrics_csv(path, report):
    lines = [",".join(lh.METRIC_COLUMNS)]
    n = len(report.gammas)
    for i in range(n):
        lines.append(",".join(_fmt17(report.metrics[c][i]) for c in lh.METRIC_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n")


_SVG_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
_SVG_PLOT_METRICS = ["density_dev_linf", "lq_gap_q1", "lq_gap_q2",
                     "res_limit_divu", "dist_to_reference"]


def write_sweep_svg(path, report):
    """Log-log plot (metric vs 1/gamma), one polyline per metric."""
    width, height = 800, 600
    mleft, mright, mtop, mbot = 80, 30, 40, 60
    series = []
    for name in _SVG_PLOT_METRICS:
        vals = report.metrics.get(name)
        if vals is None:
            continue
        pts = [(1.0 / g, v) for g, v in zip(report.gammas, vals)
               if np.isfinite(v) and v > 0.0]
        if len(pts) >= 2:
            series.append((name, pts))
    if not series:
        Path(path).write_text(
            f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}">'
            "<text x='20' y='40'>no positive series to plot</text></svg>\n")
        return
    xs = [np.log10(x) for _, pts in series for x, _ in pts]
    ys = [np.log10(y) for _, pts in series for _, y in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    x0, x1 = x0 - 0.1, x1 + 0.1
    y0, y1 = y0 - 0.2, y1 + 0.2

    def sx(lx):
        return mleft + (lx - x0) / (x1 - x0) * (width - mleft - mright)

    def sy(ly):
        return height - mbot - (ly - y0) / (y1 - y0) * (height - mtop - mbot)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
             'font-family="monospace" font-size="12">',
             f'<rect x="{mleft}" y="{mtop}" width="{width-mleft-mright}" '
             f'height="{height-mtop-mbot}" fill="none" stroke="black"/>']
    for dec in range(int(np.floor(x0)), int(np.ceil(x1)) + 1):
        if x0 <= dec <= x1:
            x = sx(dec)
            parts.append(f'<line x1="{x:.1f}" y1="{mtop}" x2="{x:.1f}" '
                         f'y2="{height-mbot}" stroke="#cccccc"/>')
            parts.append(f'<text x="{x:.1f}" y="{height-mbot+18}" '
                         f'text-anchor="middle">1e{dec}</text>')
    for dec in range(int(np.floor(y0)), int(np.ceil(y1)) + 1):
        if y0 <= dec <= y1:
            y = sy(dec)
            parts.append(f'<line x1="{mleft}" y1="{y:.1f}" x2="{width-mright}" '
                         f'y2="{y:.1f}" stroke="#cccccc"/>')
            parts.append(f'<text x="{mleft-8}" y="{y+4:.1f}" '
                         f'text-anchor="end">1e{dec}</text>')
    parts.append(f'<text x="{(mleft+width-mright)/2}" y="{height-18}" '
                 'text-anchor="middle">1/gamma</text>')
    for k, (name, pts) in enumerate(series):
        color = _SVG_COLORS[k % len(_SVG_COLORS)]
        coords = " ".join(f"{sx(np.log10(x)):.2f},{sy(np.log10(y)):.2f}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     'stroke-width="1.5"/>')
        rate = report.rates.get(name)
        label = name if rate is None else f"{name} (slope {rate:.2f})"
        parts.append(f'<text x="{mleft+10}" y="{mtop+16+14*k}" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def run_sweep(config_path, out_dir=None, threads=None, gammas_override=None):
    cfg = RunConfig.load(config_path)
    gammas = gammas_override or cfg.gammas
    if gammas is None:
        raise ConfigError("sweep needs gas.gammas (a list with at least 2 entries)")
    if len(gammas) < 2:
        raise ConfigError("sweep needs at least 2 gamma values")
    out = Path(out_dir or cfg.output_dir or "run_sweep")
    out.mkdir(parents=True, exist_ok=True)
    sha = cfg.hash()
    _json_dump(out / "config.json", cfg.raw)
    grid = cfg.build_grid()
    m = cfg.resolve_m(gammas[0])
    family = lh.TestFunctionFamily.build(grid, core_fraction=cfg.core_fraction,
                                         n_centers=cfg.n_centers, scales=cfg.scales)
    nthreads = threads if threads is not None else cfg.threads
    report = lh.gamma_sweep(cfg.problem, gammas, m, cfg.upstream, cfg.geometry,
                            grid, config=cfg.solver, core_fraction=cfg.core_fraction,
                            mach_bar=cfg.mach_bar, q_list=cfg.q_list, family=family,
                            threads=nthreads)
    write_metrics_csv(out / "metrics.csv", report)
    rate = report.rates.get(cfg.rate_metric)
    if len(gammas) < 3:
        rate_ok = True        # a fit needs 3 samples; the gate is vacuous here
    else:
        rate_ok = rate is not None and cfg.rate_bracket[0] <= rate <= cfg.rate_bracket[1]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.raw,
        "config_sha256": sha,
        "problem": cfg.problem,
        "m": m,
        "gammas": report.gammas,
        "metrics": report.metrics,
        "rates": report.rates,
        "rate_metric": cfg.rate_metric,
        "rate_bracket": list(cfg.rate_bracket),
        "rate_ok": bool(rate_ok),
        "conditions": _conditions_dict(report.conditions),
        "test_family": report.family,
        "core_fraction": report.core_fraction,
        "incomplete": report.incomplete,
        "failures": {str(k): v for k, v in report.failures.items()},
    }
    _json_dump(out / "report.json", doc)
    write_sweep_svg(out / "sweep_metrics.svg", report)
    if report.incomplete:
        print("sweep incomplete: " + "; ".join(f"gamma={k}: {v}"
              for k, v in report.failures.items()), file=sys.stderr)
        return EXIT_INCOMPLETE, out
    if not rate_ok:
        print(f"fitted rate for {cfg.rate_metric} is "
              f"{'missing' if rate is None else f'{rate:.3f}'}, outside "
              f"{list(cfg.rate_bracket)}", file=sys.stderr)
        return EXIT_RATE, out
    return EXIT_OK, out


# ----------------------------------------------------------------------
# check
# ----------------------------------------------------------------------

def _suite_mms(cfg):
    """Manufactured-solution orders on flat and mapped grids."""
    results = {}
    grids = cfg.mms_grids
    if len(grids) < 2:
        raise ConfigError("check.mms_grids needs at least 2 sizes")

    def orders(geometry, L, coeff_fn, src_fn, exact_fn):
        errs = []
        for n in grids:
            grid = geo.build_grid(geometry, L, n, n)
            X, Y = grid.x1_c, grid.x2_c
            ex = exact_fn(X, Y)
            lo_f = geometry.lower(grid.xi_f)[0]
            w_f = geometry.width(grid.xi_f)[0]
            lo_c = geometry.lower(grid.xi_c)[0]
            w_c = geometry.width(grid.xi_c)[0]
            prob = elliptic.EllipticProblem(
                grid, coeff_fn(X, Y), src_fn(X, Y),
                west=elliptic.Dirichlet(exact_fn(grid.xi_f[0],
                                                 lo_f[0] + grid.eta_c * w_f[0])),
                east=elliptic.Dirichlet(exact_fn(grid.xi_f[-1],
                                                 lo_f[-1] + grid.eta_c * w_f[-1])),
                south=elliptic.Dirichlet(exact_fn(grid.xi_c, lo_c)),
                north=elliptic.Dirichlet(exact_fn(grid.xi_c, lo_c + w_c)))
            psi = elliptic.solve(prob, tol=1e-12)
            errs.append(elliptic.mms_error(ex, psi, grid)[0])
        return [float(np.log2(errs[i] / errs[i + 1])) for i in range(len(errs) - 1)]

    def exact(x, y):
        return np.sin(np.pi * x) * np.sin(np.pi * y)

    def src_const(x, y):
        return 2.0 * np.pi ** 2 * exact(x, y)

    flat = orders(geo.NozzleGeometry2D(0.0, 1.0), 0.5,
                  lambda x, y: np.ones_like(x), src_const, exact)
    mapped = orders(geo.NozzleGeometry2D(0.2, 1.2), 2.0,
                    lambda x, y: np.ones_like(x), src_const, exact)
    results["flat_orders"] = flat
    results["mapped_orders"] = mapped
    results["pass"] = bool(min(flat) >= 1.9 and min(mapped) >= 1.8)
    return results


def _suite_divcurl(cfg):
    out = lh.divcurl_diagnostic(cfg.divcurl_n, n_cells=cfg.divcurl_cells)
    worst_compliant = max(out["compliant"])
    final_gap = abs(out["violating"][-1] - out["analytic_violating"])
    out.update({"worst_compliant": worst_compliant, "final_gap": final_gap,
                "pass": bool(worst_compliant <= 1e-10 and final_gap <= 1e-2)})
    return out


def _suite_closure(cfg, n_samples=400, seed=20240817):
    """Random subsonic roots re-checked against a plain scalar bisection."""
    rng = np.random.default_rng(seed)
    worst_dev = 0.0
    worst_resid = 0.0
    worst_mach = 0.0
    for _ in range(n_samples):
        g = float(rng.uniform(1.2, 12.0))
        B = float(rng.uniform(0.5, 5.0))
        S = float(rng.uniform(0.5, 2.0))
        homent = bool(rng.integers(0, 2))
        if homent:
            rho_smax = (2.0 * (g - 1.0) * B / (g * (g + 1.0))) ** (1.0 / (g - 1.0))
            phi2 = float(rng.uniform(0.0, 0.98)) * g * rho_smax ** (g + 1.0)
            root = ff.subsonic_root_homentropic(phi2, B, g)

            def fn(r):
                return (phi2 / (2.0 * r * r) if phi2 > 0 else 0.0) \
                    + g / (g - 1.0) * r ** (g - 1.0) - B

            lo = (phi2 / g) ** (1.0 / (g + 1.0))
            hi = ((g - 1.0) * B / g) ** (1.0 / (g - 1.0))
            resid = abs(fn(root)) / B
            mach2 = phi2 / (g * root ** (g + 1.0)) if root > 0 else 0.0
        else:
            p_smax = (2.0 * S * (g - 1.0) * B / (g * (g + 1.0))) ** (g / (g - 1.0))
            phi2 = float(rng.uniform(0.0, 0.98)) * g * p_smax ** ((g + 1.0) / g) / S
            root = ff.subsonic_root_full(phi2, B, S, g)

            def fn(p):
                return (phi2 / (2.0 * p ** (2.0 / g)) if phi2 > 0 else 0.0) \
                    + g / ((g - 1.0) * S) * p ** ((g - 1.0) / g) - B

            lo = (S * phi2 / g) ** (g / (g + 1.0))
            hi = ((g - 1.0) * S * B / g) ** (g / (g - 1.0))
            resid = abs(fn(root)) / B
            mach2 = S * phi2 / (g * root ** ((g + 1.0) / g)) if root > 0 else 0.0
        a, b = lo, hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            if fn(mid) > 0.0:
                b = mid
            else:
                a = mid
        oracle = 0.5 * (a + b)
        worst_dev = max(worst_dev, abs(root - oracle) / max(abs(oracle), 1e-300))
        worst_resid = max(worst_resid, resid)
        worst_mach = max(worst_mach, np.sqrt(mach2))
    return {"samples": n_samples, "worst_rel_dev": worst_dev,
            "worst_residual": worst_resid, "worst_mach": worst_mach,
            "pass": bool(worst_dev <= 1e-10 and worst_resid <= 1e-12
                         and worst_mach <= 1.0 + 1e-12)}


def run_check(config_path, out_dir=None):
    cfg = RunConfig.load(config_path)
    if not cfg.check_suites:
        raise ConfigError("check.suites must not be empty")
    known = {"mms": _suite_mms, "divcurl": _suite_divcurl, "closure": _suite_closure}
    unknown = [s for s in cfg.check_suites if s not in known]
    if unknown:
        raise ConfigError(f"unknown check suites: {unknown}")
    results = {}
    for name in cfg.check_suites:
        results[name] = known[name](cfg)
    all_pass = all(r["pass"] for r in results.values())
    doc = {"schema_version": SCHEMA_VERSION, "config_sha256": cfg.hash(),
           "suites": results, "pass": bool(all_pass)}
    out = Path(out_dir or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    _json_dump(out / "check_report.json", doc)
    print(json.dumps({k: v["pass"] for k, v in results.items()}))
    return (EXIT_OK if all_pass else 1), out


def run_report(run_dir):
    run_dir = Path(run_dir)
    summary = run_dir / "summary.json"
    report = run_dir / "report.json"
    if summary.exists():
        doc = json.loads(summary.read_text())
        d = doc["diagnostics"]
        print(f"solve: problem={doc['problem']} gamma={doc['gamma']} m={doc['m']:.6g}")
        print(f"  converged={d['converged']} iterations={d['iterations']} "
              f"final_update={d['final_update']:.3e}")
        print(f"  max_mach={d.get('max_mach', float('nan')):.4f} "
              f"flux_dev={d['flux_max_rel_dev']:.3e}")
        return EXIT_OK
    if report.exists():
        doc = json.loads(report.read_text())
        print(f"sweep: problem={doc['problem']} gammas={doc['gammas']}")
        print(f"  rates: " + ", ".join(f"{k}={v:.3f}" for k, v in doc["rates"].items()))
        cond = doc.get("conditions")
        if cond:
            print(f"  A1 pass={cond['a1_pass']} A3 ratio={cond['a3_ratio']:.3f} "
                  f"H {cond['h_first_to_last']:.2f}x F1 {cond['f1_first_to_last']:.2f}x")
        print(f"  incomplete={doc['incomplete']} rate_ok={doc['rate_ok']}")
        return EXIT_OK
    print(f"no summary.json or report.json under {run_dir}", file=sys.stderr)
    return EXIT_CONFIG


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------

def main(argv=None):
    parser = argparse.ArgumentParser(prog="nozlimit",
                                     description="subsonic nozzle solver and "
                                                 "stiff-gas sweep harness")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "sweep", "check"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int, default=None)
        if name == "sweep":
            p.add_argument("--gamma", default=None,
                           help="comma-separated gamma list override")
    p = sub.add_parser("report")
    p.add_argument("run_dir")
    args = parser.parse_args(argv)

    try:
        if args.command == "solve":
            code, out = run_solve(args.config, args.out, args.threads)
        elif args.command == "sweep":
            gammas = None
            if args.gamma:
                gammas = [float(g) for g in args.gamma.split(",")]
            code, out = run_sweep(args.config, args.out, args.threads, gammas)
        elif args.command == "check":
            code, out = run_check(args.config, args.out)
        else:
            return run_report(args.run_dir)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResolutionError as exc:
        print(f"resolution error: {exc}", file=sys.stderr)
        return EXIT_RESOLUTION
    except NozlimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN


if __name__ == "__main__":
    sys.exit(main())
