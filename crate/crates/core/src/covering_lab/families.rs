use super::cubes::{check_box_coverage, net_site, residual_cover, sites_by_cube, ResidualCover};
use super::gauge::{gauge_domain_violations, gauge_sum, GaugeFamily, GaugeReport};
use super::geometry::{vitali_select, Ball, Region, VitaliSelection};
use crate::error::{Error, Result};
use crate::spectral_field::{FieldSample, Lattice};
use crate::stats::neumaier_sum;
use crate::variance_model::{phi_gauge, psi, FieldParams};
use rayon::prelude::*;
use serde::Serialize;

/// Enlargement applied to the coarse selected balls in the final cover.
pub const COARSE_ENLARGEMENT: f64 = 13.0;
/// Enlargement applied to the fine selected balls in the final cover.
pub const FINE_ENLARGEMENT: f64 = 5.0;

/// Reported with every cover: what the desk-scale construction does and does not show.
pub const DESK_SCALE_NOTE: &str = "desk-scale covering: the ladder is user-chosen (default dyadic 2^-4..2^-10); \
only the algebra of the construction (disjointness, budget sums, cover property) is verified, \
not the asymptotic scales R_p = 2^(-2^(2^p))";

fn region_sites(lattice: &Lattice, region: &Region) -> Result<Vec<usize>> {
    if region.dim() != lattice.dim() {
        return Err(Error::domain(format!("region has dimension {} but the lattice has {}", region.dim(), lattice.dim())));
    }
    let (lo, hi) = region.bounds();
    check_box_coverage(lattice, &lo, &hi)?;
    let slack = 1e-9 * lattice.spacing();
    Ok((0..lattice.len()).filter(|&s| region.contains(&lattice.point(s), slack)).collect())
}

fn count_in_ball(field: &FieldSample, sites: &[usize], ball: &Ball) -> usize {
    sites.iter().filter(|&&s| ball.contains_point(field.site_values(s))).count()
}

/// `λ_N{t ∈ region : X(t) ∈ ball}` on the lattice: cell volume times the
/// number of region sites whose value lies in the closed ball.
pub fn occupancy_measure(field: &FieldSample, region: &Region, ball: &Ball) -> Result<f64> {
    if ball.dim() != field.components {
        return Err(Error::domain("ball must live in the field's value space"));
    }
    let sites = region_sites(&field.lattice, region)?;
    Ok(count_in_ball(field, &sites, ball) as f64 * field.lattice.cell_volume())
}

/// Calibration constants of the two heavy-ball thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub c1: f64,
    pub c2: f64,
    pub n0: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { c1: 1.0, c2: 1.0, n0: 1.0 }
    }
}

/// Radii rungs and the dyadic net supplying candidate centers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeavyBallConfig {
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    pub net_order: u32,
    pub thresholds: Thresholds,
}

impl Default for HeavyBallConfig {
    fn default() -> Self {
        let rung = |k: i32| 2f64.powi(-k);
        HeavyBallConfig {
            coarse: (4..=7).map(rung).collect(),
            fine: (8..=10).map(rung).collect(),
            net_order: 8,
            thresholds: Thresholds::default(),
        }
    }
}

impl HeavyBallConfig {
    pub fn ladder(&self) -> Vec<f64> {
        self.coarse.iter().chain(&self.fine).copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeavyBall {
    pub ball: Ball,
    /// Site `t_Q` whose image is the center.
    pub site: usize,
    pub occupancy: f64,
    pub threshold: f64,
}

/// Budget inequalities for the two selected subfamilies. Disjoint image balls
/// occupy disjoint sets of sites, so each sum of occupations is at most the
/// lattice measure of the region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetCheck {
    pub region_measure: f64,
    /// `Σ_{F1'} φ(r_A)`.
    pub f1_gauge_sum: f64,
    pub f1_occupancy_sum: f64,
    /// `λ_N(region) / c₁`.
    pub f1_bound: f64,
    pub f1_holds: bool,
    /// `Σ_{F2'} r_A^d Ψ(r_A)`.
    pub f2_mass_sum: f64,
    pub f2_occupancy_sum: f64,
    /// `λ_N(region) / (c₂ n₀)`.
    pub f2_bound: f64,
    pub f2_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeavyBallFamilies {
    pub candidates: usize,
    pub f1: Vec<HeavyBall>,
    pub f1_selection: VitaliSelection,
    pub f2: Vec<HeavyBall>,
    pub f2_selection: VitaliSelection,
    pub budget: BudgetCheck,
}

impl HeavyBallFamilies {
    pub fn f1_selected(&self) -> Vec<&HeavyBall> {
        self.f1_selection.kept.iter().map(|&k| &self.f1[k]).collect()
    }

    pub fn f2_selected(&self) -> Vec<&HeavyBall> {
        self.f2_selection.kept.iter().map(|&k| &self.f2[k]).collect()
    }
}

fn check_rungs(cfg: &HeavyBallConfig, params: &FieldParams) -> Result<()> {
    for &r in cfg.coarse.iter().chain(&cfg.fine) {
        phi_gauge(r, params).map_err(|e| Error::domain(format!("ladder radius {r} outside the gauge domain: {e}")))?;
    }
    let t = cfg.thresholds;
    if [t.c1, t.c2, t.n0].iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::domain("thresholds must be finite and nonnegative"));
    }
    Ok(())
}

/// Candidate balls `B(X(t_Q), r)` over the dyadic net and every rung, with
/// their occupation of the region.
fn candidates(field: &FieldSample, sites: &[usize], net: &[usize], rungs: &[f64]) -> Vec<(Ball, usize, usize)> {
    let pairs: Vec<(usize, f64)> = rungs.iter().flat_map(|&r| net.iter().map(move |&s| (s, r))).collect();
    pairs
        .par_iter()
        .map(|&(s, r)| {
            let ball = Ball { center: field.site_values(s).to_vec(), radius: r };
            let count = count_in_ball(field, sites, &ball);
            (ball, s, count)
        })
        .collect()
}

/// Coarse family `F1` (occupation `≥ c₁ φ(r)`), its disjoint selection, and
/// the fine family `F2` (occupation `≥ c₂ n₀ r^d Ψ(r)`, disjoint from the
/// 5×-enlarged coarse selection) with its own selection.
pub fn heavy_ball_families(field: &FieldSample, lo: &[f64], hi: &[f64], cfg: &HeavyBallConfig) -> Result<HeavyBallFamilies> {
    let params = field.params;
    check_rungs(cfg, &params)?;
    let region = Region::interval(lo.to_vec(), hi.to_vec())?;
    let sites = region_sites(&field.lattice, &region)?;
    let cell = field.lattice.cell_volume();
    let net: Vec<usize> = sites_by_cube(&field.lattice, lo, hi, cfg.net_order)
        .iter()
        .map(|(key, s)| net_site(&field.lattice, key, cfg.net_order, s))
        .collect();
    let d = params.d() as i32;
    let mass = |r: f64| psi(r, &params).map(|p| r.powi(d) * p);
    let t = cfg.thresholds;

    let mut f1 = Vec::new();
    for (ball, site, count) in candidates(field, &sites, &net, &cfg.coarse) {
        let threshold = t.c1 * phi_gauge(ball.radius, &params)?;
        let occupancy = count as f64 * cell;
        if occupancy >= threshold {
            f1.push(HeavyBall { ball, site, occupancy, threshold });
        }
    }
    let f1_balls: Vec<Ball> = f1.iter().map(|b| b.ball.clone()).collect();
    let f1_selection = vitali_select(&f1_balls);
    let f1_enlarged: Vec<Ball> = f1_selection.kept.iter().map(|&k| f1_balls[k].scaled(5.0)).collect();

    let mut f2 = Vec::new();
    for (ball, site, count) in candidates(field, &sites, &net, &cfg.fine) {
        if f1_enlarged.iter().any(|b| b.intersects(&ball)) {
            continue;
        }
        let threshold = t.c2 * t.n0 * mass(ball.radius)?;
        let occupancy = count as f64 * cell;
        if occupancy >= threshold {
            f2.push(HeavyBall { ball, site, occupancy, threshold });
        }
    }
    let f2_balls: Vec<Ball> = f2.iter().map(|b| b.ball.clone()).collect();
    let f2_selection = vitali_select(&f2_balls);

    let region_measure = sites.len() as f64 * cell;
    let f1_sel: Vec<&HeavyBall> = f1_selection.kept.iter().map(|&k| &f1[k]).collect();
    let f2_sel: Vec<&HeavyBall> = f2_selection.kept.iter().map(|&k| &f2[k]).collect();
    let f1_gauge_sum = neumaier_sum(f1_sel.iter().map(|b| phi_gauge(b.ball.radius, &params).unwrap_or(f64::NAN)));
    let f1_occupancy_sum = neumaier_sum(f1_sel.iter().map(|b| b.occupancy));
    let f2_mass_sum = neumaier_sum(f2_sel.iter().map(|b| mass(b.ball.radius).unwrap_or(f64::NAN)));
    let f2_occupancy_sum = neumaier_sum(f2_sel.iter().map(|b| b.occupancy));
    let f1_bound = region_measure / t.c1;
    let f2_bound = region_measure / (t.c2 * t.n0);
    let slack = 1.0 + 1e-12;
    let budget = BudgetCheck {
        region_measure,
        f1_gauge_sum,
        f1_occupancy_sum,
        f1_bound,
        f1_holds: t.c1 * f1_gauge_sum <= f1_occupancy_sum * slack && f1_occupancy_sum <= region_measure * slack,
        f2_mass_sum,
        f2_occupancy_sum,
        f2_bound,
        f2_holds: t.c2 * t.n0 * f2_mass_sum <= f2_occupancy_sum * slack && f2_occupancy_sum <= region_measure * slack,
    };
    Ok(HeavyBallFamilies { candidates: net.len() * (cfg.coarse.len() + cfg.fine.len()), f1, f1_selection, f2, f2_selection, budget })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverConfig {
    pub region_lo: Vec<f64>,
    pub region_hi: Vec<f64>,
    pub families: HeavyBallConfig,
    pub residual_order: u32,
}

impl Default for CoverConfig {
    fn default() -> Self {
        CoverConfig { region_lo: vec![0.5], region_hi: vec![1.0], families: HeavyBallConfig::default(), residual_order: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoverCheck {
    pub net_points: usize,
    pub uncovered: usize,
}

impl CoverCheck {
    pub fn holds(&self) -> bool {
        self.uncovered == 0
    }
}

/// Full desk-scale covering: `G = {13A : A ∈ F1'} ∪ {5A : A ∈ F2'}`, the
/// residual cubes whose image escapes `G`, and the gauge sum of the union.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverReport {
    pub note: &'static str,
    pub families: HeavyBallFamilies,
    pub enlarged: Vec<Ball>,
    pub residual: ResidualCover,
    pub cover_check: CoverCheck,
    pub gauge_families: Vec<GaugeFamily>,
    /// `None` when some `2r` falls outside the gauge domain; see `gauge_violations`.
    pub gauge: Option<GaugeReport>,
    pub gauge_violations: Vec<f64>,
}

pub fn covering_report(field: &FieldSample, cfg: &CoverConfig) -> Result<CoverReport> {
    let (lo, hi) = (&cfg.region_lo, &cfg.region_hi);
    let families = heavy_ball_families(field, lo, hi, &cfg.families)?;
    let coarse: Vec<Ball> = families.f1_selected().iter().map(|b| b.ball.scaled(COARSE_ENLARGEMENT)).collect();
    let fine: Vec<Ball> = families.f2_selected().iter().map(|b| b.ball.scaled(FINE_ENLARGEMENT)).collect();
    let enlarged: Vec<Ball> = coarse.iter().chain(&fine).cloned().collect();
    let residual = residual_cover(field, lo, hi, cfg.residual_order, &enlarged)?;

    let region = Region::interval(lo.clone(), hi.clone())?;
    let sites = region_sites(&field.lattice, &region)?;
    let uncovered = sites
        .par_iter()
        .filter(|&&s| {
            let x = field.site_values(s);
            !enlarged.iter().chain(&residual.balls).any(|b| b.contains_point(x))
        })
        .count();
    let cover_check = CoverCheck { net_points: sites.len(), uncovered };

    let gauge_families = vec![
        GaugeFamily { label: "F1' x13".into(), radii: coarse.iter().map(|b| b.radius).collect() },
        GaugeFamily { label: "F2' x5".into(), radii: fine.iter().map(|b| b.radius).collect() },
        GaugeFamily { label: "residual".into(), radii: residual.balls.iter().map(|b| b.radius).collect() },
    ];
    let gauge_violations: Vec<f64> =
        gauge_families.iter().flat_map(|f| gauge_domain_violations(&f.radii, &field.params)).collect();
    let gauge = gauge_violations
        .is_empty()
        .then(|| gauge_sum(&gauge_families, &field.params, &cfg.families.ladder()))
        .transpose()?;
    Ok(CoverReport { note: DESK_SCALE_NOTE, families, enlarged, residual, cover_check, gauge_families, gauge, gauge_violations })
}
