"""Steady subsonic Euler nozzle flows and their stiff-gas limit, numerically.

Solves the planar full Euler and axisymmetric homentropic nozzle problems in
stream-function form, and sweeps the adiabatic exponent to verify the
incompressible-limit behaviour (uniform bounds, Lq-norm law, weak residuals,
div-curl commutation, wall traces) at desk scale.
"""

from .core import (AprioriBounds, DerivedFields, FlowState, GasKind, GasModel,
                   apriori_bounds, bernoulli, derived_fields, energy_sandwich_margins,
                   entropy, mach_number, sonic_speed, total_energy)
from .elliptic import Dirichlet, EllipticProblem, LinearSystem, Neumann, assemble, \
    mms_error, solve, solve_linear
from .far_field import (ConstantProfile, FarFieldState, PolynomialProfile,
                        TanhStepProfile, UpstreamProfiles, choking_flux,
                        far_field_axisym, far_field_full_euler,
                        far_field_incompressible, subsonic_root_full,
                        subsonic_root_homentropic)
from .geometry import (MappedGrid, NozzleGeometry2D, NozzleGeometryAxisym,
                       build_grid, domain_measure, section_flux, wall_profiles)
from .limit_harness import (BumpFunction, ConditionReport, LqLawResult, SweepReport,
                            TestFunctionFamily, check_framework_conditions,
                            convergence_rate, core_mask, divcurl_diagnostic,
                            divu_residual, gamma_sweep, incompressibility_functional,
                            lq_norm_law, normal_trace, system_fluxes, weak_residual)
from .nozzle_solver import (PicardConfig, StreamSolution, picard_step,
                            solve_incompressible_reference, solve_problem1,
                            solve_problem2, streamline_pullback, vorticity_field)

__version__ = "0.1.0"
