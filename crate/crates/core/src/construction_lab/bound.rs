use super::configuration::PointConfiguration;
use crate::error::{Error, Result};
use crate::rng::{purpose, stream};
use crate::variance_model::{sigma_log, FieldParams, LogScale};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::f64::consts::{LN_2, PI};

/// `c_0 = 2e^{−1/2}/√(2π)`: `P{|Z| ≤ a} ≥ c_0 a` for `a ∈ (0, 1]`.
pub fn small_ball_c0() -> f64 {
    2.0 * (-0.5f64).exp() / (2.0 * PI).sqrt()
}

/// `c_1 = 2^{−1−Σ k 2^{−k}} = 2^{−3}`.
pub const C1: f64 = 0.125;

/// Constructive per-point constant `(c_0 c_1 / (2√d))^d` for the bound on
/// `P{∀i: |X(t_i)| ≤ ε}`. The factor `1/2` converts the chained `2ε` ball
/// back to radius `ε`.
pub fn default_c0(d: usize) -> f64 {
    (small_ball_c0() * C1 / (2.0 * (d as f64).sqrt())).powi(d as i32)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductBound {
    pub log_bound: f64,
    pub c0: f64,
    /// Smallest log-slack in the conditions on `σ(|t_1|)` and `σ(d(t_i, F_k))`.
    pub cond_margin: f64,
}

/// `log[C_0^n ε^{nd} σ^{−d}(|t_1|) ∏ σ^{−d}(d(t_i, F_k))]`.
pub fn product_lower_bound(config: &PointConfiguration, eps: LogScale, params: &FieldParams, c0: f64) -> Result<ProductBound> {
    if config.surrogate {
        return Err(Error::domain("product bound needs a configuration in true coordinates, not the surrogate"));
    }
    if !(c0 > 0.0) {
        return Err(Error::domain(format!("C0 = {c0} must be positive")));
    }
    let n = config.n();
    let p = n.trailing_zeros() as usize;
    let d = params.d() as f64;
    let lambda = eps.lambda();
    let mut terms = Vec::with_capacity(n);
    let r1 = config.points[0].iter().map(|x| x * x).sum::<f64>().sqrt();
    terms.push((0usize, LogScale::from_radius(r1)?));
    for i in 2..=n {
        let (k, _) = config.branch.parent(i);
        let r = config.distance_to_previous(i);
        terms.push((k, LogScale::from_radius(r)?));
    }
    let mut cond_margin = f64::INFINITY;
    let mut log_bound = n as f64 * (c0.ln() - d * lambda);
    for (k, s) in terms {
        let ls = sigma_log(s, params);
        cond_margin = cond_margin.min(ls - ((k as f64 - p as f64) * LN_2 - lambda));
        log_bound -= d * ls;
    }
    if cond_margin < 0.0 {
        return Err(Error::domain(format!(
            "configuration violates sigma(d(t_i,F_k)) >= 2^(k-p) eps (log slack {cond_margin})"
        )));
    }
    Ok(ProductBound { log_bound, c0, cond_margin })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct McProbability {
    pub estimate: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Monte Carlo estimate of `P{∀i: |X(t_i)| ≤ ε}` for `d` i.i.d. coordinates
/// with covariance matrix `cov` across the points.
pub fn joint_small_ball_mc(cov: &DMatrix<f64>, d: usize, eps: f64, draws: usize, seed: u64) -> Result<McProbability> {
    let n = cov.nrows();
    if n == 0 || cov.ncols() != n || draws == 0 {
        return Err(Error::domain("covariance must be square and non-empty; draws > 0"));
    }
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numerical("covariance matrix is not positive definite"))?;
    let l = chol.l();
    let mut rng = stream(seed, &[purpose::GAUSSIAN_VECTOR, n as u64, d as u64]);
    let mut z = DVector::<f64>::zeros(n);
    let mut sq = vec![0.0; n];
    let eps2 = eps * eps;
    let mut hits = 0usize;
    for _ in 0..draws {
        sq.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..d {
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let x = &l * &z;
            for (s, xi) in sq.iter_mut().zip(x.iter()) {
                *s += xi * xi;
            }
        }
        if sq.iter().all(|&s| s <= eps2) {
            hits += 1;
        }
    }
    let phat = hits as f64 / draws as f64;
    let se = (phat * (1.0 - phat) / draws as f64).sqrt();
    Ok(McProbability { estimate: phat, std_error: se, draws })
}

/// Covariance matrix `[cov(t_i, t_j)]` of one coordinate process.
pub fn covariance_matrix<F>(points: &[Vec<f64>], cov: F) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64], &[f64]) -> Result<f64>,
{
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let c = cov(&points[i], &points[j])?;
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    Ok(m)
}

/// Bound versus Monte Carlo truth for one configuration.
#[derive(Debug, Clone, Serialize)]
pub struct SidakCheck {
    pub bound: ProductBound,
    pub mc: McProbability,
    /// `(estimate − bound) / std_error`.
    pub margin_in_se: f64,
    /// `bound ≤ estimate + 3 SE`.
    pub consistent: bool,
}

pub fn sidak_check<F>(
    config: &PointConfiguration,
    eps: f64,
    params: &FieldParams,
    c0: f64,
    cov: F,
    draws: usize,
    seed: u64,
) -> Result<SidakCheck>
where
    F: Fn(&[f64], &[f64]) -> Result<f64>,
{
    if config.n() > 4 {
        return Err(Error::domain(format!("Monte Carlo companion supports n <= 4, got {}", config.n())));
    }
    let bound = product_lower_bound(config, LogScale::from_radius(eps)?, params, c0)?;
    let m = covariance_matrix(&config.points, cov)?;
    let mc = joint_small_ball_mc(&m, params.d(), eps, draws, seed)?;
    let b = bound.log_bound.exp();
    let margin_in_se = if mc.std_error > 0.0 { (mc.estimate - b) / mc.std_error } else { f64::INFINITY };
    let consistent = b <= mc.estimate + 3.0 * mc.std_error;
    Ok(SidakCheck { bound, mc, margin_in_se, consistent })
}
