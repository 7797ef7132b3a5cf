//! Covering primitives and gauge sums: closed balls, the greedy 5r-selection,
//! dyadic cubes, occupation of image balls, and a desk-scale two-family
//! cover of the range of a sample path.

mod cubes;
mod families;
mod gauge;
mod geometry;

pub use cubes::{oscillation_profile, residual_cover, CubeCheck, CubeFamily, OscillationPoint, ResidualCover};
pub use families::{
    covering_report, heavy_ball_families, occupancy_measure, BudgetCheck, CoverCheck, CoverConfig, CoverReport,
    HeavyBall, HeavyBallConfig, HeavyBallFamilies, Thresholds, COARSE_ENLARGEMENT, DESK_SCALE_NOTE, FINE_ENLARGEMENT,
};
pub use gauge::{gauge_domain_violations, gauge_sum, write_gauge_csv, GaugeFamily, GaugePart, GaugeReport, GAUGE_ID};
pub use geometry::{vitali_select, Ball, Region, VitaliCheck, VitaliSelection};
