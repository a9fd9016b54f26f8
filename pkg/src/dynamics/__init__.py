from .dde_integrator import (HistoryBuffer, IntegratorConfig, Trajectory,
                             integrate, load_tabulated_history,
                             sample_history, snap_step, step_euler, step_rk4)
from .diagnostics import (certificate_from_budget, characteristic_roots,
                          check_flocking_condition, classify_behavior,
                          decay_envelope_excess, decay_profile,
                          dissipative_inequality_excess, fit_decay_rate,
                          fit_log_slope, history_grid, lyapunov,
                          lyapunov_series, max_speed_rv, solve_decay_rate,
                          spatial_diameter, spread_excess,
                          velocity_bound_excess, velocity_diameter,
                          verify_hull_contraction)
from .influence import (InfluenceFamily, InfluenceFunction, QuadratureConfig,
                        definite_integral, eval_psi, quadrature_tail,
                        tail_integral, validate_influence)
from .meanfield import (INCLUDE_ALL, DatumSpec, EmpiricalMeasure, ExcludeSelf,
                        IncludeAll, MeasureHistory, assignment_distance,
                        bounded_lipschitz_gap, convergence_study,
                        empirical_from_trajectory, force_field_bounds,
                        kinetic_flocking_certificate, meanfield_force,
                        measure_support_diameters, perturb_history, replicate,
                        stability_ratio, stability_series, support_radii,
                        wasserstein1, wasserstein1_marginal,
                        wasserstein1_replicated, wasserstein1_sorted)
from .particle_system import (ConstantVelocityHistory, InitialHistory,
                              SystemState, TabulatedHistory,
                              communication_weights,
                              nearest_neighbor_weight_bound, relaxation_form,
                              rhs)

__all__ = [
    # influence
    "InfluenceFamily",
    "InfluenceFunction",
    "QuadratureConfig",
    "definite_integral",
    "eval_psi",
    "quadrature_tail",
    "tail_integral",
    "validate_influence",
    # particle system
    "ConstantVelocityHistory",
    "InitialHistory",
    "SystemState",
    "TabulatedHistory",
    "communication_weights",
    "nearest_neighbor_weight_bound",
    "relaxation_form",
    "rhs",
    # integrator
    "HistoryBuffer",
    "IntegratorConfig",
    "Trajectory",
    "integrate",
    "load_tabulated_history",
    "sample_history",
    "snap_step",
    "step_euler",
    "step_rk4",
    # diagnostics
    "certificate_from_budget",
    "characteristic_roots",
    "check_flocking_condition",
    "classify_behavior",
    "decay_envelope_excess",
    "decay_profile",
    "dissipative_inequality_excess",
    "fit_decay_rate",
    "fit_log_slope",
    "history_grid",
    "lyapunov",
    "lyapunov_series",
    "max_speed_rv",
    "solve_decay_rate",
    "spatial_diameter",
    "spread_excess",
    "velocity_bound_excess",
    "velocity_diameter",
    "verify_hull_contraction",
    # mean field
    "INCLUDE_ALL",
    "DatumSpec",
    "EmpiricalMeasure",
    "ExcludeSelf",
    "IncludeAll",
    "MeasureHistory",
    "assignment_distance",
    "bounded_lipschitz_gap",
    "convergence_study",
    "empirical_from_trajectory",
    "force_field_bounds",
    "kinetic_flocking_certificate",
    "meanfield_force",
    "measure_support_diameters",
    "perturb_history",
    "replicate",
    "stability_ratio",
    "stability_series",
    "support_radii",
    "wasserstein1",
    "wasserstein1_marginal",
    "wasserstein1_replicated",
    "wasserstein1_sorted",
]
