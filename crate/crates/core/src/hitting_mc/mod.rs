//! Conditional decomposition at an anchor point, the auxiliary field `X⁽³⁾`,
//! Monte Carlo hitting probabilities, and the level-set measures `μ_n` with
//! their moment bounds. Regime outputs are trend diagnostics only.

mod decomposition;
mod hitting;
mod level_set;

pub use decomposition::{
    box_count, independence_study, make_decomposition, split_field, split_with_plan, x3_field, x3_identity_residual,
    BoxCount, Decomposition, IndependenceProbe, IndependenceReport, SplitPlan, ALPHA_GRID_POINTS, MAX_HALVINGS,
};
pub use hitting::{
    default_target_norm, hit_probability, write_hit_csv, HitExperiment, HitPoint, HitReport, HitTrend,
    HIT_RESOLUTION_FACTOR, TREND_LABEL,
};
pub use level_set::{
    calibrate_slnd_constant, default_mu_ladder, mu_n_expectation, mu_n_lower_bound, mu_n_measure,
    mu_n_second_moment_bound, mu_n_study, mu_spacing_limit, second_moment_prefactor, weak_limit_witness, write_mu_csv,
    MuStudy, SecondMomentBound, SlndCalibration, WeakLimitReport,
};

#[cfg(test)]
mod tests;
