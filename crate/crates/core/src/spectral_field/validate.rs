//! Empirical checks of the variance assumptions on synthesized samples.

use super::lattice::Lattice;
use super::model::SpectralModel;
use super::sample::FieldSample;
use crate::error::{Error, Result};
use crate::stats::neumaier_sum;
use crate::variance_model::{sigma, sigma_star, FieldParams};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Minimum number of samples accepted by [`empirical_variogram`].
pub const MIN_VARIOGRAM_SAMPLES: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct VariogramEstimate {
    pub lags: Vec<f64>,
    /// Mean squared increment over all site pairs, components and samples.
    pub mean_sq_increment: Vec<f64>,
    /// `d̂²(ℓ) / σ²(ℓ)`.
    pub ratio: Vec<f64>,
    /// Ratios divided by the ratio at the reference lag.
    pub calibrated_ratio: Vec<f64>,
    pub reference: usize,
    /// Factor by which `c_norm` must be divided to make the reference ratio 1.
    pub kappa: f64,
}

/// Mean squared increments along the first axis at `lag_steps` (in lattice
/// spacings), normalized by `σ²` and calibrated at `lag_steps[reference]`.
pub fn empirical_variogram(samples: &[FieldSample], lag_steps: &[usize], reference: usize) -> Result<VariogramEstimate> {
    if samples.len() < MIN_VARIOGRAM_SAMPLES {
        return Err(Error::domain(format!(
            "empirical variogram needs at least {MIN_VARIOGRAM_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if reference >= lag_steps.len() {
        return Err(Error::domain("reference index outside the lag list"));
    }
    let first = &samples[0];
    let params = first.params;
    let lat = &first.lattice;
    let d = first.components;
    let last = lat.dim() - 1;
    let n0 = lat.counts()[0];
    // sites per slab along axis 0
    let stride: usize = lat.counts()[1..].iter().product();
    let _ = last;
    let mut mean_sq = Vec::with_capacity(lag_steps.len());
    for &k in lag_steps {
        if k == 0 || k >= n0 {
            return Err(Error::domain(format!("lag of {k} steps does not fit the lattice")));
        }
        let partial: Vec<f64> = samples
            .iter()
            .map(|s| {
                let mut acc = 0.0;
                for i in 0..n0 - k {
                    for j in 0..stride {
                        let a = (i * stride + j) * d;
                        let b = ((i + k) * stride + j) * d;
                        for c in 0..d {
                            let diff = s.values[b + c] - s.values[a + c];
                            acc += diff * diff;
                        }
                    }
                }
                acc
            })
            .collect();
        let pairs = (samples.len() * (n0 - k) * stride * d) as f64;
        mean_sq.push(neumaier_sum(partial) / pairs);
    }
    let lags: Vec<f64> = lag_steps.iter().map(|&k| k as f64 * lat.spacing()).collect();
    let ratio = lags
        .iter()
        .zip(&mean_sq)
        .map(|(&l, &m)| Ok(m / sigma(l, &params)?.powi(2)))
        .collect::<Result<Vec<_>>>()?;
    let kappa = ratio[reference];
    let calibrated_ratio = ratio.iter().map(|r| r / kappa).collect();
    Ok(VariogramEstimate { lags, mean_sq_increment: mean_sq, ratio, calibrated_ratio, reference, kappa })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalVariance {
    pub variance: f64,
    pub regularized: bool,
}

/// `Var(X₁(t) | X₁(s), s ∈ points)` from the model covariance.
pub fn conditional_variance(model: &SpectralModel, t: &[f64], points: &[Vec<f64>]) -> Result<ConditionalVariance> {
    let prior = model.covariance(t, t)?;
    if points.is_empty() {
        return Ok(ConditionalVariance { variance: prior, regularized: false });
    }
    let k = points.len();
    let mut sigma_m = DMatrix::<f64>::zeros(k, k);
    let mut c = DVector::<f64>::zeros(k);
    for i in 0..k {
        c[i] = model.covariance(t, &points[i])?;
        for j in 0..=i {
            let v = model.covariance(&points[i], &points[j])?;
            sigma_m[(i, j)] = v;
            sigma_m[(j, i)] = v;
        }
    }
    let (chol, regularized) = match sigma_m.clone().cholesky() {
        Some(ch) => (ch, false),
        None => {
            let mut reg = sigma_m;
            for i in 0..k {
                reg[(i, i)] += 1e-12;
            }
            let ch = reg
                .cholesky()
                .ok_or_else(|| Error::numerical("conditioning covariance is singular even after regularization"))?;
            (ch, true)
        }
    };
    let w = chol.solve(&c);
    let variance = (prior - c.dot(&w)).max(0.0);
    Ok(ConditionalVariance { variance, regularized })
}

#[derive(Debug, Clone, Serialize)]
pub struct SlndProbe {
    pub conditional_variance: f64,
    /// Conditional variance divided by `σ²(r)`.
    pub ratio: f64,
    pub sites_used: usize,
    pub regularized: bool,
}

/// Conditional variance of `X₁(t)` given the lattice sites in the shell
/// `r ≤ |s − t| ≤ δ₀` (nearest `max_sites` of them).
pub fn slnd_probe(
    model: &SpectralModel,
    lattice: &Lattice,
    t: &[f64],
    shell: (f64, f64),
    max_sites: usize,
) -> Result<SlndProbe> {
    let (r, delta0) = shell;
    if !(r > 0.0 && r <= delta0) {
        return Err(Error::domain(format!("shell ({r}, {delta0}) is invalid")));
    }
    if max_sites > 64 {
        return Err(Error::domain("at most 64 conditioning sites are supported"));
    }
    let mut candidates: Vec<(f64, usize)> = (0..lattice.len())
        .filter_map(|site| {
            let p = lattice.point(site);
            let dist = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            (dist >= r * (1.0 - 1e-12) && dist <= delta0 * (1.0 + 1e-12)).then_some((dist, site))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    candidates.truncate(max_sites);
    let points: Vec<Vec<f64>> = candidates.iter().map(|&(_, s)| lattice.point(s)).collect();
    let cv = conditional_variance(model, t, &points)?;
    let ratio = cv.variance / sigma(r, model.params())?.powi(2);
    Ok(SlndProbe { conditional_variance: cv.variance, ratio, sites_used: points.len(), regularized: cv.regularized })
}

/// Variance scale and threshold for the error of a band-truncated field.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TruncationBound {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    #[serde(rename = "A")]
    pub big_a: f64,
    pub u_min: f64,
    pub k0: f64,
}

impl TruncationBound {
    /// `exp(−u²/(K0·A))`.
    pub fn tail_bound(&self, u: f64) -> f64 {
        (-u * u / (self.k0 * self.big_a)).exp()
    }
}

/// `A = r² a² σ²(1/a) + σ²(1/b)`.
pub fn truncation_variance(r: f64, a: f64, b: f64, params: &FieldParams) -> Result<f64> {
    if !(a > 0.0 && b > a) {
        return Err(Error::domain(format!("clause a < b violated: a = {a}, b = {b}")));
    }
    Ok(r * r * a * a * sigma(1.0 / a, params)?.powi(2) + sigma(1.0 / b, params)?.powi(2))
}

/// Checks every precondition and returns the bound, naming the first failed clause.
pub fn truncation_bound(r: f64, a: f64, b: f64, params: &FieldParams, k0: f64) -> Result<TruncationBound> {
    if !(k0 > 0.0 && k0.is_finite()) {
        return Err(Error::domain(format!("clause K0 > 0 violated: K0 = {k0}")));
    }
    // the cutoff B is taken as 1/δ₀
    let big_b = 1.0 / params.delta0();
    if !(a > big_b) {
        return Err(Error::domain(format!("clause B < a violated: B = {big_b}, a = {a}")));
    }
    if !(b > a) {
        return Err(Error::domain(format!("clause a < b violated: a = {a}, b = {b}")));
    }
    if !(r > 0.0 && r < 1.0 / big_b) {
        return Err(Error::domain(format!("clause 0 < r < 1/B violated: r = {r}, 1/B = {}", 1.0 / big_b)));
    }
    let big_a = truncation_variance(r, a, b, params)?;
    let root = big_a.sqrt();
    if root >= 1.0 || sigma_star(root, params)? > r / 2.0 {
        return Err(Error::domain(format!(
            "clause sigma_star(sqrt(A)) <= r/2 violated: A = {big_a}, r = {r}"
        )));
    }
    let log_arg = (k0 * r / sigma_star(root, params)?).ln();
    let u_min = k0 * (big_a * log_arg.max(0.0)).sqrt();
    Ok(TruncationBound { r, a, b, big_a, u_min, k0 })
}
