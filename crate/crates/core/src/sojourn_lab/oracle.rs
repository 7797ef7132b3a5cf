use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadOptions};
use crate::spectral_field::special::sphere_area;
use crate::variance_model::FieldParams;
use statrs::function::gamma::gamma_lr;

/// `P{|Z| ≤ x}` for a standard Gaussian vector `Z` in `R^d` scaled by `sd`,
/// i.e. the χ²_d distribution function at `(x/sd)²`.
pub fn small_ball_probability(d: usize, x: f64, sd: f64) -> f64 {
    if sd <= 0.0 {
        return 1.0;
    }
    let q = (x / sd).powi(2);
    if d == 2 {
        -(-q / 2.0).exp_m1()
    } else {
        gamma_lr(d as f64 / 2.0, q / 2.0)
    }
}

/// `E T_ε = ∫_{|t| ≤ ε^β} P{|X(t)| ≤ ε} dt` for a radial variance function
/// `v(|t|) = E X_1(t)²`, by adaptive quadrature in the radius with dyadic
/// break points (relative tolerance 1e−8, well inside the required 1e−6).
pub fn first_moment_oracle(params: &FieldParams, eps: f64, beta: f64, variance: &dyn Fn(f64) -> f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0 && beta > 0.0) {
        return Err(Error::domain(format!("eps = {eps}, beta = {beta} out of range")));
    }
    let n = params.n();
    let d = params.d();
    let radius = eps.powf(beta);
    let mut breaks: Vec<f64> = (0..=80).rev().map(|k| radius * 0.5f64.powi(k)).collect();
    breaks.insert(0, 0.0);
    let integrand = |r: f64| {
        let v = variance(r);
        r.powi(n as i32 - 1) * small_ball_probability(d, eps, v.max(0.0).sqrt())
    };
    let q = integrate_with_breaks(integrand, &breaks, QuadOptions::rel(1e-8))?;
    Ok(sphere_area(n) * q.value)
}
