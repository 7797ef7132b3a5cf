//! Truncated sojourn times `T_ε = |{t : |t| ≤ ε^β, |X(t)| ≤ ε}|` on lattice
//! samples, their moments and tails, and a quadrature oracle for `E T_ε`.

mod oracle;

pub use oracle::{first_moment_oracle, small_ball_probability};

use crate::error::{Error, Result};
use crate::rng::split_seed;
use crate::spectral_field::{FieldSample, FieldSource, Lattice};
use crate::stats::{self, Interval, LinearFit};
use crate::variance_model::{psi, sigma_star, FieldParams};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Resolution rule: lattice spacing at most `σ*(ε)/RESOLUTION_FACTOR`.
pub const RESOLUTION_FACTOR: f64 = 8.0;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Full CI width above this fraction of the estimate marks a moment inconclusive.
pub const INCONCLUSIVE_WIDTH: f64 = 0.3;
pub const MIN_TAIL_EXCEEDANCES: usize = 5;

#[derive(Debug, Clone, Serialize)]
pub struct SojournConfig {
    pub eps: f64,
    pub beta: f64,
    pub lattice: Lattice,
    pub replications: usize,
}

impl SojournConfig {
    /// Centered cubic lattice covering `|t| ≤ ε^β` with spacing `σ*(ε)/8`.
    pub fn new(params: &FieldParams, eps: f64, beta: f64, replications: usize) -> Result<Self> {
        let h = sigma_star(eps, params)? / RESOLUTION_FACTOR;
        Self::with_spacing(params, eps, beta, replications, h)
    }

    pub fn with_spacing(params: &FieldParams, eps: f64, beta: f64, replications: usize, spacing: f64) -> Result<Self> {
        check_eps_beta(params, eps, beta)?;
        if replications == 0 {
            return Err(Error::domain("replications must be positive"));
        }
        let lattice = Lattice::centered(params.n(), eps.powf(beta), spacing)?;
        let cfg = SojournConfig { eps, beta, lattice, replications };
        check_lattice(&cfg.lattice, params, eps, beta)?;
        Ok(cfg)
    }

    /// `λ_N(B(0, ε^β))`.
    pub fn ball_volume(&self) -> f64 {
        ball_volume(self.lattice.dim(), self.eps.powf(self.beta))
    }
}

fn ball_volume(n: usize, r: f64) -> f64 {
    crate::spectral_field::special::sphere_area(n) / n as f64 * r.powi(n as i32)
}

fn check_eps_beta(params: &FieldParams, eps: f64, beta: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("eps = {eps} must lie in (0, 1)")));
    }
    let upper = 1.0 / params.h();
    if !(beta > 1.0 && beta < upper) {
        return Err(Error::domain(format!("beta = {beta} must lie strictly inside (1, 1/H) = (1, {upper})")));
    }
    Ok(())
}

fn check_lattice(lattice: &Lattice, params: &FieldParams, eps: f64, beta: f64) -> Result<()> {
    let radius = eps.powf(beta);
    if lattice.dim() != params.n() {
        return Err(Error::domain(format!("lattice dimension {} differs from N = {}", lattice.dim(), params.n())));
    }
    if !lattice.covers_ball(radius) {
        return Err(Error::domain(format!("lattice does not cover the ball |t| <= eps^beta = {radius}")));
    }
    let limit = sigma_star(eps, params)? / RESOLUTION_FACTOR;
    if lattice.spacing() > limit * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "resolution rule violated: spacing {} exceeds sigma_star(eps)/8 = {limit}",
            lattice.spacing()
        )));
    }
    Ok(())
}

/// `h^N · #{sites : |t| ≤ ε^β, |X(t)| ≤ ε}` with the Euclidean norm over the
/// `d` components.
pub fn sojourn_time(field: &FieldSample, eps: f64, beta: f64) -> Result<f64> {
    check_eps_beta(&field.params, eps, beta)?;
    check_lattice(&field.lattice, &field.params, eps, beta)?;
    Ok(sojourn_unchecked(field, eps, beta))
}

fn sojourn_unchecked(field: &FieldSample, eps: f64, beta: f64) -> f64 {
    let radius = eps.powf(beta);
    let eps2 = eps * eps;
    let lat = &field.lattice;
    let count = (0..lat.len())
        .filter(|&s| lat.norm(s) <= radius && field.site_values(s).iter().map(|x| x * x).sum::<f64>() <= eps2)
        .count();
    count as f64 * lat.cell_volume()
}

/// Replicated observations of `T_ε` for one configuration.
#[derive(Debug, Clone, Serialize)]
pub struct SojournRun {
    pub eps: f64,
    pub beta: f64,
    pub spacing: f64,
    pub sites: usize,
    pub seed: u64,
    pub source: &'static str,
    pub t_values: Vec<f64>,
}

/// Draws `cfg.replications` fields (replication `r` uses `split_seed(seed, r)`)
/// and records `T_ε` on each. Order of the output does not depend on threads.
pub fn sojourn_samples(source: &FieldSource, cfg: &SojournConfig, seed: u64) -> Result<SojournRun> {
    let params = source.params();
    check_eps_beta(params, cfg.eps, cfg.beta)?;
    check_lattice(&cfg.lattice, params, cfg.eps, cfg.beta)?;
    let prepared = source.prepare(&cfg.lattice)?;
    let t_values = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|r| prepared.sample(split_seed(seed, r)).map(|f| sojourn_unchecked(&f, cfg.eps, cfg.beta)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SojournRun {
        eps: cfg.eps,
        beta: cfg.beta,
        spacing: cfg.lattice.spacing(),
        sites: cfg.lattice.len(),
        seed,
        source: source.label(),
        t_values,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentEstimate {
    pub eps: f64,
    pub beta: f64,
    pub n: u32,
    /// `E̊[T_ε^n]`.
    pub moment: f64,
    pub ci: Interval,
    /// `(E̊[T_ε^n])^{1/n} / (n ε^d Ψ(ε))`.
    pub normalized: f64,
    pub inconclusive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalizationSummary {
    pub n: u32,
    /// Largest normalized statistic over the ε grid (`Ĉ₁`).
    pub c1_hat: f64,
    /// Smallest one (`Ĉ₃`).
    pub c3_hat: f64,
    pub spread: f64,
    /// Every ratio between neighbouring ε values lies in `[1/2, 2]`.
    pub stable_under_halving: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SojournStats {
    pub moments: Vec<MomentEstimate>,
    pub summaries: Vec<NormalizationSummary>,
    pub pass: bool,
    /// The proven window `n ≤ log log log(1/ε)` is never reached at float
    /// scales; every moment here is an extrapolation outside it.
    pub outside_proven_window: bool,
}

/// Moments `n = 1..=n_max` with bootstrap CIs and the normalized statistic
/// for each run, runs ordered by decreasing ε.
pub fn mc_moments(runs: &[SojournRun], params: &FieldParams, n_max: u32, seed: u64) -> Result<SojournStats> {
    if n_max == 0 || n_max > 4 {
        return Err(Error::domain(format!("n_max = {n_max} must lie in 1..=4")));
    }
    if !params.critical() || !params.gamma_at_most_threshold() {
        return Err(Error::domain("moment normalization needs d = N/H and gamma <= 1/d"));
    }
    let d = params.d() as i32;
    let mut moments = Vec::new();
    for (ri, run) in runs.iter().enumerate() {
        if run.t_values.is_empty() {
            return Err(Error::domain("empty sojourn run"));
        }
        let scale = run.eps.powi(d) * psi(run.eps, params)?;
        for n in 1..=n_max {
            let powered: Vec<f64> = run.t_values.iter().map(|t| t.powi(n as i32)).collect();
            let moment = stats::mean(&powered);
            let ci = stats::bootstrap_ci(&powered, stats::mean, BOOTSTRAP_RESAMPLES, 0.05, split_seed(seed, (ri as u64) << 8 | n as u64));
            let inconclusive = !(moment > 0.0) || (ci.hi - ci.lo) > INCONCLUSIVE_WIDTH * moment;
            moments.push(MomentEstimate {
                eps: run.eps,
                beta: run.beta,
                n,
                moment,
                ci,
                normalized: moment.powf(1.0 / n as f64) / (n as f64 * scale),
                inconclusive,
            });
        }
    }
    let summaries: Vec<NormalizationSummary> = (1..=n_max)
        .map(|n| {
            let m: Vec<f64> = moments.iter().filter(|e| e.n == n).map(|e| e.normalized).collect();
            let c1_hat = m.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let c3_hat = m.iter().copied().fold(f64::INFINITY, f64::min);
            let stable = m.windows(2).all(|w| {
                let r = w[1] / w[0];
                (0.5..=2.0).contains(&r)
            });
            NormalizationSummary { n, c1_hat, c3_hat, spread: c1_hat / c3_hat, stable_under_halving: stable }
        })
        .collect();
    let pass = summaries
        .iter()
        .all(|s| s.c3_hat > 0.0 && s.c3_hat <= s.c1_hat && s.c1_hat.is_finite() && s.stable_under_halving);
    Ok(SojournStats { moments, summaries, pass, outside_proven_window: true })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailPoint {
    pub u: f64,
    pub exceedances: usize,
    pub prob: f64,
    pub ci: Interval,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailCurve {
    pub eps: f64,
    pub points: Vec<TailPoint>,
    /// `log P ≈ intercept + slope·u` over the retained points.
    pub fit: LinearFit,
    pub k1_hat: f64,
    /// Grid values dropped for having fewer than five exceedances.
    pub truncated: Vec<f64>,
    /// Every retained point is at least `e^{−K̂₁ u}/4`.
    pub above_quarter_law: bool,
    pub pass: bool,
    /// Some `u` exceeds `log log log(1/ε)` (with unit constant), or that
    /// quantity is not positive; the tail law is then only an extrapolation.
    pub outside_proven_window: bool,
}

/// Empirical `P{T_ε ≥ u ε^d Ψ(ε)}` on `u_grid` with 95% Wilson intervals
/// and a least-squares fit of `log P` against `u`.
pub fn tail_probability(t_values: &[f64], eps: f64, params: &FieldParams, u_grid: &[f64]) -> Result<TailCurve> {
    if t_values.is_empty() {
        return Err(Error::domain("no sojourn samples"));
    }
    let scale = eps.powi(params.d() as i32) * psi(eps, params)?;
    let total = t_values.len();
    let mut points = Vec::new();
    let mut truncated = Vec::new();
    for &u in u_grid {
        let k = t_values.iter().filter(|&&t| t >= u * scale).count();
        if k < MIN_TAIL_EXCEEDANCES {
            truncated.push(u);
            continue;
        }
        points.push(TailPoint { u, exceedances: k, prob: k as f64 / total as f64, ci: stats::wilson(k, total, 1.96) });
    }
    if points.len() < 2 {
        return Err(Error::numerical(format!(
            "only {} grid points have at least {MIN_TAIL_EXCEEDANCES} exceedances",
            points.len()
        )));
    }
    let us: Vec<f64> = points.iter().map(|p| p.u).collect();
    let logs: Vec<f64> = points.iter().map(|p| p.prob.ln()).collect();
    let fit = stats::linear_fit(&us, &logs);
    let k1_hat = -fit.slope;
    let above = points.iter().all(|p| p.prob >= 0.25 * (-k1_hat * p.u).exp());
    let lll = (-eps.ln()).ln().ln();
    let umax = us.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TailCurve {
        eps,
        points,
        fit,
        k1_hat,
        truncated,
        above_quarter_law: above,
        pass: fit.r_squared >= 0.9 && above,
        outside_proven_window: !(lll > 0.0 && umax <= lll),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PaleyZygmund {
    pub theta: f64,
    /// Empirical `P{Y ≥ θ E Y}`.
    pub lhs: f64,
    /// `(1 − θ)² (E Y)² / E Y²`.
    pub rhs: f64,
    pub holds: bool,
}

pub fn paley_zygmund_check(samples: &[f64], theta: f64) -> Result<PaleyZygmund> {
    if samples.is_empty() {
        return Err(Error::domain("Paley-Zygmund check needs samples"));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::domain(format!("theta = {theta} must lie in [0, 1]")));
    }
    if let Some(bad) = samples.iter().find(|&&y| !(y >= 0.0)) {
        return Err(Error::domain(format!("sample {bad} is negative")));
    }
    let m1 = stats::mean(samples);
    let m2 = stats::neumaier_sum(samples.iter().map(|y| y * y)) / samples.len() as f64;
    let lhs = samples.iter().filter(|&&y| y >= theta * m1).count() as f64 / samples.len() as f64;
    let rhs = if m2 > 0.0 { (1.0 - theta).powi(2) * m1 * m1 / m2 } else { 0.0 };
    Ok(PaleyZygmund { theta, lhs, rhs, holds: lhs >= rhs })
}

/// CSV with header `eps,beta,n,moment,ci_lo,ci_hi,normalized`.
pub fn write_moments_csv<W: Write>(w: W, moments: &[MomentEstimate]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["eps", "beta", "n", "moment", "ci_lo", "ci_hi", "normalized"])?;
    for m in moments {
        out.write_record([
            m.eps.to_string(),
            m.beta.to_string(),
            m.n.to_string(),
            m.moment.to_string(),
            m.ci.lo.to_string(),
            m.ci.hi.to_string(),
            m.normalized.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// CSV with header `eps,u,tail_prob,ci_lo,ci_hi`.
pub fn write_tail_csv<W: Write>(w: W, curves: &[TailCurve]) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["eps", "u", "tail_prob", "ci_lo", "ci_hi"])?;
    for c in curves {
        for p in &c.points {
            out.write_record([
                c.eps.to_string(),
                p.u.to_string(),
                p.prob.to_string(),
                p.ci.lo.to_string(),
                p.ci.hi.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
