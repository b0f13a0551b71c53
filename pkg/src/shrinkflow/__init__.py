"""shrinkflow: a numerical laboratory for the rescaled mean curvature flow
near closed self-shrinkers."""

__version__ = "0.1.0"

from .errors import (AxisCollision, Blowup, BracketFailure, ConfigError,
                     GraphOverflow, GridMismatch, HypothesisFail,
                     InvalidWindow, NoConvergence, NotGraphical,
                     SelfIntersection, ShrinkflowError, SingularLinearization,
                     StiffODE, TimeRangeError)
from .geometry import (KIND_CURVE, KIND_REVOLUTION, BaseShrinker,
                       EntropyResult, EntropySearchConfig, ImmersedState,
                       build_circle, build_ellipse, build_sphere, entropy,
                       from_points, gaussian_area, geometry_csv,
                       gradient_norm2, load_state, save_state,
                       state_from_dict, state_to_dict, sup_norms)
from .graphs import (GraphFunction, GraphQuantities, WeightedForms,
                     flow_operator, frechet_remainder, gradient_operator,
                     graph_area, graph_gradient_norm2, graph_points,
                     graph_quantities, graph_state, linearization,
                     matrix_csv, q_inner, q_norm, q2_norm,
                     second_variation_matrix, taylor_check, weighted_forms)
from .flow import (FlowOptions, FlowTrajectory, gradient_identity_residual,
                   parabolic_dt, resample_equal_arclength, run_curve_flow,
                   run_graph_flow, step_graph)
from .shrinkers import (NewtonResult, ShootingResult, SpectralDecomposition,
                        StabilityReport, newton_find_shrinker,
                        shoot_angenent_torus, spectrum, spectrum_csv,
                        stability_report)
from .group import (ComebackSchedule, GroupElement, NoReturnVerdict,
                    OrbitFit, StoredFlow, apply_group, comeback_schedule,
                    no_return_experiment, orbit_distance,
                    random_group_element, renormalized_flow)
from .inequalities import (InequalityReport, SeriesBound, check_decay,
                           decay_bound, drift_bound_check, drift_window_study,
                           geometric_series_bound, lojasiewicz_check,
                           weighted_integral_check)
from .reduction import (Reduction, build_reduction, kernel_coordinates,
                        kernel_field, lemma_f_check, lemma_grad_check, nbar,
                        psi, ratio_ladder, reduced_function)
