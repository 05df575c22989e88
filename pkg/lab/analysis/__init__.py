from .geometry import (
    Domain, GridFunction, ModelManifold, RadialGrid, WarpingProfile,
    annulus_norm, make_model, stochastic_completeness_indicator, volume_over_area,
)
from .operators import (
    DiscreteOperator, IneqCertificate, check_subsolution, hat, laplacian, lp_norm,
    pair_distributional, resolvent_positivity, schrodinger, solve_boundary_problem,
    spectral_bottom, w12_seminorm, weak_form_pair,
)
from .groundstate import (
    GroundState, closed_form_ground_state, ground_state_for, ground_transform,
    local_ground_state, solve_dirichlet_ground, transport_certificates, verify_pw_identity,
)
from .smoothing import green_coordinate, monotone_smooth_approx, verify_approx_properties
from .kato import (
    brezis_kato_check, check_on_cover, h_epsilon, h_epsilon_prime, kato_via_appendix,
    positive_part_certificate,
)
from .liouville import (
    caccioppoli_check, caccioppoli_constant, chain_rule_consistency, cutoff, cutoff_family,
    energy_decay_test, liouville_verdict, lp_membership, regularity_certificate,
    subquadratic_class_check,
)
from .positivity import CATALOG, counterexample_catalog, pp_experiment, resolvent_view
