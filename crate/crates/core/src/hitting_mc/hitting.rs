use crate::error::{Error, Result};
use crate::rng::split_seed;
use crate::spectral_field::{FieldSource, Lattice};
use crate::stats::{self, wilson, Interval};
use crate::variance_model::{classify_polarity, sigma_star, Regime};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Net spacing must satisfy `h ≤ σ*(δ_min) / HIT_RESOLUTION_FACTOR`.
pub const HIT_RESOLUTION_FACTOR: f64 = 4.0;
/// Label attached to every regime output: finite samples cannot certify polarity.
pub const TREND_LABEL: &str = "trend diagnostics (polarity is an almost-sure statement and is not certified)";

/// Monte Carlo estimate of `P{min_{t ∈ net} |X(t) − z| ≤ δ}` over a ladder of `δ`.
#[derive(Debug, Clone)]
pub struct HitExperiment {
    pub source: FieldSource,
    pub lattice: Lattice,
    pub z: Vec<f64>,
    pub deltas: Vec<f64>,
    pub replications: usize,
}

fn resolution_limit(source: &FieldSource, deltas: &[f64]) -> Result<f64> {
    let dmin = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(sigma_star(dmin, source.params())? / HIT_RESOLUTION_FACTOR)
}

impl HitExperiment {
    /// Net on the box `[lo, hi]` with the largest dyadic spacing allowed by the resolution rule.
    pub fn new(source: FieldSource, lo: Vec<f64>, hi: Vec<f64>, z: Vec<f64>, deltas: Vec<f64>, replications: usize) -> Result<Self> {
        let limit = resolution_limit(&source, &deltas)?;
        let spacing = limit.log2().floor().exp2();
        Self::with_lattice(source, Lattice::new(lo, hi, spacing)?, z, deltas, replications)
    }

    pub fn with_lattice(source: FieldSource, lattice: Lattice, z: Vec<f64>, deltas: Vec<f64>, replications: usize) -> Result<Self> {
        if deltas.is_empty() || deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::domain("deltas must be a non-empty list of positive radii"));
        }
        if deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::domain("deltas must be strictly decreasing"));
        }
        if z.len() != source.params().d() {
            return Err(Error::domain("target z must have d components"));
        }
        if lattice.dim() != source.params().n() {
            return Err(Error::domain("net dimension differs from N"));
        }
        if replications == 0 {
            return Err(Error::domain("replications must be positive"));
        }
        let limit = resolution_limit(&source, &deltas)?;
        if lattice.spacing() > limit * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "resolution rule violated: spacing {} exceeds sigma*(delta_min)/{HIT_RESOLUTION_FACTOR} = {limit}",
                lattice.spacing()
            )));
        }
        Ok(HitExperiment { source, lattice, z, deltas, replications })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitPoint {
    pub delta: f64,
    pub hits: usize,
    pub prob: f64,
    pub ci: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitTrend {
    pub label: &'static str,
    pub regime: Regime,
    pub min_prob: f64,
    pub final_prob: f64,
    pub strictly_decreasing: bool,
    /// `P(δ_last) ≥ P(δ_first)/2 > 0`.
    pub plateau: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HitReport {
    pub z: Vec<f64>,
    pub spacing: f64,
    pub replications: usize,
    pub seed: u64,
    pub points: Vec<HitPoint>,
    pub trend: HitTrend,
    /// Per-path `min_t |X(t) − z|` over the net.
    #[serde(skip_serializing)]
    pub min_distances: Vec<f64>,
}

/// Per-path minimum distance to `z` over the net (origin excluded); every
/// `δ` is then read off the same paths, so the estimates are nested.
pub fn hit_probability(exp: &HitExperiment, seed: u64) -> Result<HitReport> {
    let prepared = exp.source.prepare(&exp.lattice)?;
    let sites: Vec<usize> = (0..exp.lattice.len()).filter(|&s| exp.lattice.norm(s) > 0.0).collect();
    let min_distances = (0..exp.replications as u64)
        .into_par_iter()
        .map(|r| {
            let f = prepared.sample(split_seed(seed, r))?;
            let m2 = sites
                .iter()
                .map(|&s| f.site_values(s).iter().zip(&exp.z).map(|(x, z)| (x - z) * (x - z)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            Ok(m2.sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = min_distances.len();
    let points: Vec<HitPoint> = exp
        .deltas
        .iter()
        .map(|&delta| {
            let hits = min_distances.iter().filter(|&&m| m <= delta).count();
            HitPoint { delta, hits, prob: hits as f64 / n as f64, ci: wilson(hits, n, 1.96) }
        })
        .collect();
    let probs: Vec<f64> = points.iter().map(|p| p.prob).collect();
    let first = probs[0];
    let last = *probs.last().expect("non-empty ladder");
    let trend = HitTrend {
        label: TREND_LABEL,
        regime: classify_polarity(exp.source.params()).regime,
        min_prob: probs.iter().copied().fold(f64::INFINITY, f64::min),
        final_prob: last,
        strictly_decreasing: probs.windows(2).all(|w| w[1] < w[0]),
        plateau: last > 0.0 && last >= 0.5 * first,
    };
    Ok(HitReport { z: exp.z.clone(), spacing: exp.lattice.spacing(), replications: n, seed, points, trend, min_distances })
}

/// `0.3 · median_paths sup_t |X(t)|`, the default target norm.
pub fn default_target_norm(source: &FieldSource, lattice: &Lattice, paths: usize, seed: u64) -> Result<f64> {
    let prepared = source.prepare(lattice)?;
    let sups = (0..paths as u64)
        .into_par_iter()
        .map(|r| {
            let f = prepared.sample(split_seed(seed, r))?;
            Ok((0..lattice.len())
                .map(|s| f.site_values(s).iter().map(|x| x * x).sum::<f64>().sqrt())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(0.3 * stats::median(&sups))
}

/// CSV with header `delta,hit_prob,ci_lo,ci_hi`.
pub fn write_hit_csv<W: Write>(w: W, report: &HitReport) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["delta", "hit_prob", "ci_lo", "ci_hi"])?;
    for p in &report.points {
        out.write_record([p.delta.to_string(), p.prob.to_string(), p.ci.lo.to_string(), p.ci.hi.to_string()])?;
    }
    out.flush()?;
    Ok(())
}
