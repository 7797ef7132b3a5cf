//! Log-domain versions of the ε-ladder, point-configuration and product
//! bound constructions used for the lower bound on sojourn moments.
//!
//! Ladders are stored through `log λ_k`, so scales like `ε = exp(−e^{1700})`
//! stay exact to double precision in the quantities that matter (gaps and
//! ratios of `λ_k`).

mod bound;
mod configuration;
mod identities;
mod ladder;
mod sweep;

pub use bound::{
    covariance_matrix, default_c0, joint_small_ball_mc, product_lower_bound, sidak_check, small_ball_c0, McProbability,
    ProductBound, SidakCheck, C1,
};
pub use configuration::{
    check_configuration, enumerate_bijections, sample_configuration, BranchAssignment, ConfigurationChecks,
    PointConfiguration, MAX_DIRECT_RANGE,
};
pub use identities::{exact_identities, ExactIdentities, MAX_FACTORIAL_P, MAX_IDENTITY_P, STIRLING_WITNESS_INV};
pub use ladder::{
    build_ladder, build_ladder_unwindowed, case1_constant_bound, case2_constant_bound, max_window_p, verify_p1_to_p4,
    EpsilonLadder, LadderCase, LadderSpec, LadderVerdicts, PropertyVerdict, P4_REL_TOL,
};
pub use sweep::{construction_sweep, random_ladder, ConstructionReport, LadderRecord, SWEEP_LN_LAMBDA};
