"""Calculus and curvature verification on finite metric measure spaces.

The package discretizes first-order differential calculus on metric
measure spaces at desk scale: one-sided directional derivatives against
gradients, Cheeger energies and slopes, set-valued distributional
Laplacians, optimal transport with Kantorovich duality, p-heat flows,
and the distortion-coefficient machinery behind sharp Laplacian
comparison estimates on model spaces.  Everything is exact or
tolerance-audited; the `experiments` module packages the headline
checks behind the `mms` command line tool.
"""

from .spaces import (FiniteMMS, build_cycle_graph, build_euclidean_grid,
                     build_model_disk, build_sphere, from_distance_matrix,
                     load_space, restrict_space, save_space, validate_metric)
from .fields import (BumpField, GaussianField, LinearField, PiecewiseAffine,
                     QuadraticField, TrigField, half_sq_distance,
                     random_trig_field)
from .norms import (NormSpec, d_pm_batch, d_pm_via_difference_quotient,
                    d_pm_via_gradient_set, dual_norm, laplacian_interval_normed,
                    lp_norm, norm_from_string, polygon_norm, primal_norm)
from .slopes import (cheeger_energy, dirichlet_form, local_slope,
                     slope_equality_report, upper_gradient_check)
from .directional import (chain_rule_check, d_pm_exact, d_pm_sweep,
                          leibniz_check, linearity_check,
                          strict_convexity_probe)
from .laplace import (LaplacianInterval, LinearLaplacian, bochner_diagnostic,
                      chain_rule_laplacian_check, gamma, gamma2,
                      graph_laplacian, laplacian_interval,
                      leibniz_laplacian_check, membership_check)
from .transport import (KantorovichPotential, TransportPlan, c_transform,
                        displacement_interpolation, kantorovich_potential,
                        metric_brenier_check, wq_distance)
from .flow import (EntropyFunction, FlowTrajectory, entropy_dissipation_check,
                   entropy_value, heat_flow_p, heat_laplacian_variant,
                   heat_step_p2, renyi_entropy, semigroup_identities,
                   shannon_entropy, tsallis_entropy, wasserstein_speed_check)
from .curvature import (ComparisonReport, bishop_gromov_check, busemann,
                        cd_check, internal_energy,
                        laplacian_comparison_experiment, mcp_variant, sigma,
                        sigma_tilde, tau, tau_sigma_relation_check, tau_tilde)
from .experiments import (ExperimentResult, list_experiments, run_experiment,
                          run_suite, write_artifacts)
from .experiments import VERSION as __version__

__all__ = [
    "__version__",
    # spaces
    "FiniteMMS", "build_cycle_graph", "build_euclidean_grid",
    "build_model_disk", "build_sphere", "from_distance_matrix", "load_space",
    "restrict_space", "save_space", "validate_metric",
    # fields
    "BumpField", "GaussianField", "LinearField", "PiecewiseAffine",
    "QuadraticField", "TrigField", "half_sq_distance", "random_trig_field",
    # normed one-sided calculus
    "NormSpec", "d_pm_batch", "d_pm_via_difference_quotient",
    "d_pm_via_gradient_set", "dual_norm", "laplacian_interval_normed",
    "lp_norm", "norm_from_string", "polygon_norm", "primal_norm",
    # slopes and energies
    "cheeger_energy", "dirichlet_form", "local_slope", "slope_equality_report",
    "upper_gradient_check",
    # directional derivatives on spaces
    "chain_rule_check", "d_pm_exact", "d_pm_sweep", "leibniz_check",
    "linearity_check", "strict_convexity_probe",
    # distributional Laplacian
    "LaplacianInterval", "LinearLaplacian", "bochner_diagnostic",
    "chain_rule_laplacian_check", "gamma", "gamma2", "graph_laplacian",
    "laplacian_interval", "leibniz_laplacian_check", "membership_check",
    # optimal transport
    "KantorovichPotential", "TransportPlan", "c_transform",
    "displacement_interpolation", "kantorovich_potential",
    "metric_brenier_check", "wq_distance",
    # heat flow
    "EntropyFunction", "FlowTrajectory", "entropy_dissipation_check",
    "entropy_value", "heat_flow_p", "heat_laplacian_variant", "heat_step_p2",
    "renyi_entropy", "semigroup_identities", "shannon_entropy",
    "tsallis_entropy", "wasserstein_speed_check",
    # curvature comparison
    "ComparisonReport", "bishop_gromov_check", "busemann", "cd_check",
    "internal_energy", "laplacian_comparison_experiment", "mcp_variant",
    "sigma", "sigma_tilde", "tau", "tau_sigma_relation_check", "tau_tilde",
    # experiment suites
    "ExperimentResult", "list_experiments", "run_experiment", "run_suite",
    "write_artifacts",
]
