//! Scalar scale functions of the variance model and the analytic polarity
//! criteria built from them.
//!
//! Every function has a direct form taking a radius and a log-domain form
//! taking [`LogScale`] (`λ = log 1/r`), which is the only path for radii
//! below `exp(−700)`.

mod params;

pub use params::{parse_real, FieldParams, Hurst, LogScale, Regime, CRITICAL_TOL, MAX_MATERIALIZED_LAMBDA};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadOptions, QuadResult};
use serde::Serialize;

fn check_unit_radius(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::domain(format!("radius {r} must lie in (0, 1)")));
    }
    Ok(-r.ln())
}

/// `σ(r) = r^H (log 1/r)^γ`.
pub fn sigma(r: f64, p: &FieldParams) -> Result<f64> {
    let lambda = check_unit_radius(r)?;
    Ok(r.powf(p.h()) * lambda.powf(p.gamma()))
}

/// `log σ = −Hλ + γ log λ`.
pub fn sigma_log(s: LogScale, p: &FieldParams) -> f64 {
    -p.h() * s.lambda() + p.gamma() * s.lambda().ln()
}

/// `σ*(r) = H^{γ/H} r^{1/H} (log 1/r)^{−γ/H}`, an asymptotic inverse of `σ`.
pub fn sigma_star(r: f64, p: &FieldParams) -> Result<f64> {
    let lambda = check_unit_radius(r)?;
    let h = p.h();
    let g = p.gamma();
    Ok(h.powf(g / h) * r.powf(1.0 / h) * lambda.powf(-g / h))
}

/// `log σ*` for `r = exp(−λ)`.
pub fn sigma_star_log(s: LogScale, p: &FieldParams) -> f64 {
    let h = p.h();
    let g = p.gamma();
    (g / h) * h.ln() - s.lambda() / h - (g / h) * s.lambda().ln()
}

/// Radius below which `σ` is strictly increasing: `exp(−γ/H)` for `γ > 0`, else 1.
pub fn sigma_monotone_bound(p: &FieldParams) -> f64 {
    if p.gamma() > 0.0 {
        (-p.gamma() / p.h()).exp()
    } else {
        1.0
    }
}

fn require_gamma_at_most_threshold(p: &FieldParams) -> Result<()> {
    if !p.gamma_at_most_threshold() {
        return Err(Error::domain(format!(
            "gauge functions need gamma <= 1/d, got gamma = {} with d = {}",
            p.gamma(),
            p.d()
        )));
    }
    Ok(())
}

/// `f` evaluated at `λ = log 1/r`.
pub fn f_gauge_lambda(lambda: f64, p: &FieldParams) -> Result<f64> {
    require_gamma_at_most_threshold(p)?;
    if p.gamma_at_threshold() {
        if !(lambda > 1.0) {
            return Err(Error::domain(format!("log log(1/r) is nonpositive at log(1/r) = {lambda}")));
        }
        Ok(lambda.ln())
    } else {
        if !(lambda > 0.0) {
            return Err(Error::domain(format!("log(1/r) = {lambda} must be positive")));
        }
        Ok(lambda.powf(p.log_exponent()))
    }
}

/// `f(r) = (log 1/r)^{1−γd}` for `γ < 1/d` and `log log 1/r` for `γ = 1/d`.
pub fn f_gauge(r: f64, p: &FieldParams) -> Result<f64> {
    f_gauge_lambda(check_unit_radius(r)?, p)
}

/// `Ψ(ε)`: equal to `f(ε)` below the threshold and to 1 at it.
pub fn psi(eps: f64, p: &FieldParams) -> Result<f64> {
    psi_lambda(check_unit_radius(eps)?, p)
}

pub fn psi_lambda(lambda: f64, p: &FieldParams) -> Result<f64> {
    require_gamma_at_most_threshold(p)?;
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("log(1/eps) = {lambda} must be positive")));
    }
    if p.gamma_at_threshold() {
        Ok(1.0)
    } else {
        Ok(lambda.powf(p.log_exponent()))
    }
}

/// Hausdorff gauge `φ(r) = r^d (log 1/r)^{1−γd} log log log(1/r)`.
pub fn phi_gauge(r: f64, p: &FieldParams) -> Result<f64> {
    let lambda = check_unit_radius(r)?;
    let lll = triple_log(lambda)?;
    Ok(r.powi(p.d() as i32) * lambda.powf(p.log_exponent()) * lll)
}

/// `log φ` for `r = exp(−λ)`.
pub fn phi_gauge_log(s: LogScale, p: &FieldParams) -> Result<f64> {
    let lambda = s.lambda();
    let lll = triple_log(lambda)?;
    Ok(-(p.d() as f64) * lambda + p.log_exponent() * lambda.ln() + lll.ln())
}

fn triple_log(lambda: f64) -> Result<f64> {
    let v = lambda.ln().ln();
    if !(v > 0.0) {
        return Err(Error::domain(format!(
            "log log log(1/r) is nonpositive at log(1/r) = {lambda}; need r < exp(-e)"
        )));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PolarityVerdict {
    pub regime: Regime,
    pub points_polar: bool,
    pub integral_diverges: bool,
    pub local_time_exists: bool,
}

/// Points are polar exactly when `d > N/H`, or `d = N/H` with `γ ≤ 1/d`.
pub fn classify_polarity(p: &FieldParams) -> PolarityVerdict {
    let regime = p.regime();
    let integral_diverges = match regime {
        Regime::Subcritical => false,
        Regime::Critical => p.gamma_at_most_threshold(),
        Regime::Supercritical => true,
    };
    PolarityVerdict {
        regime,
        points_polar: integral_diverges,
        integral_diverges,
        local_time_exists: !integral_diverges,
    }
}

/// One-line human-readable summary of a verdict.
pub fn describe_verdict(p: &FieldParams, v: &PolarityVerdict) -> String {
    let regime = match v.regime {
        Regime::Subcritical => "subcritical",
        Regime::Critical => "critical",
        Regime::Supercritical => "supercritical",
    };
    let polar = if v.points_polar { "points polar" } else { "points NOT polar" };
    let mut s = format!("{regime}, {polar}");
    if v.regime == Regime::Critical && p.gamma_at_threshold() {
        s.push_str(", local time non-existent boundary case γ=1/d");
    } else if v.local_time_exists {
        s.push_str(", local time exists");
    } else {
        s.push_str(", local time non-existent");
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralCriterion {
    pub value: f64,
    pub error_estimate: f64,
    pub diverges: bool,
}

/// Truncated integral `∫_{r_min}^{δ₀} r^{N−1} σ^{−d}(r) dr` together with the
/// analytic divergence verdict of the untruncated integral.
pub fn integral_criterion(p: &FieldParams, r_min: f64) -> Result<IntegralCriterion> {
    let q = truncated_integral(p.n(), p.h(), p.d(), p.gamma(), r_min, p.delta0())?;
    Ok(IntegralCriterion {
        value: q.value,
        error_estimate: q.error,
        diverges: classify_polarity(p).integral_diverges,
    })
}

/// Raw quadrature behind [`integral_criterion`]. `h` may be any value in
/// `(0, 1]` here, which admits boundary oracles outside the field family.
///
/// Substituting `s = log 1/r` turns the integrand into the smooth
/// `exp(−(N − Hd)s) s^{−γd}` on `[log 1/δ₀, log 1/r_min]`.
pub fn truncated_integral(n: usize, h: f64, d: usize, gamma: f64, r_min: f64, delta0: f64) -> Result<QuadResult> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::domain(format!("H = {h} must lie in (0, 1]")));
    }
    if !(r_min > 0.0 && r_min < delta0 && delta0 < 1.0) {
        return Err(Error::domain(format!(
            "need 0 < r_min < delta0 < 1, got r_min = {r_min}, delta0 = {delta0}"
        )));
    }
    let rate = n as f64 - h * d as f64;
    let gd = gamma * d as f64;
    let s_lo = -delta0.ln();
    let s_hi = -r_min.ln();
    let s_split = -(10.0 * r_min).ln();
    let mut breaks = vec![s_lo];
    if s_split > s_lo && s_split < s_hi {
        breaks.push(s_split);
    }
    breaks.push(s_hi);
    integrate_with_breaks(
        |s: f64| (-rate * s).exp() * s.powf(-gd),
        &breaks,
        QuadOptions { abs_tol: 0.0, rel_tol: 1e-8, max_intervals: 4000 },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuffTracePoint {
    pub lambda: f64,
    pub log_quotient: f64,
    /// `exp(log_quotient)`; may be `0` or `inf` when out of float range.
    pub quotient: f64,
}

/// `r^N / σ^d(r (log log 1/r)^{−1/N})` along a list of radii given in log form.
pub fn suff_condition_trace(p: &FieldParams, radii: &[LogScale]) -> Result<Vec<SuffTracePoint>> {
    let n = p.n() as f64;
    let d = p.d() as f64;
    radii
        .iter()
        .map(|s| {
            let lambda = s.lambda();
            if lambda < std::f64::consts::E * (1.0 - 1e-12) {
                return Err(Error::domain(format!(
                    "radius exp(-{lambda}) is above exp(-e); the shifted radius is undefined"
                )));
            }
            // log(1/ρ) = λ + shift for ρ = r (log log 1/r)^{−1/N}; the λ terms are
            // grouped first so the critical case cancels exactly
            let shift = lambda.ln().ln() / n;
            let lambda_rho = lambda + shift;
            let dh = d * p.h();
            let log_quotient = (dh - n) * lambda + dh * shift - d * p.gamma() * lambda_rho.ln();
            Ok(SuffTracePoint { lambda, log_quotient, quotient: log_quotient.exp() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, d: usize, h: &str, gamma: f64) -> FieldParams {
        FieldParams::new(n, d, h.parse().unwrap(), gamma, 0.5).unwrap()
    }

    #[test]
    fn sigma_examples() {
        let p = params(1, 2, "0.5", 0.25);
        let e = std::f64::consts::E;
        assert!((sigma(1.0 / e, &p).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        let q = params(1, 2, "0.5", 0.0);
        assert!((sigma(0.25, &q).unwrap() - 0.5).abs() < 1e-15);
        assert!(sigma(1.0, &q).is_err());
        assert!(sigma(0.0, &q).is_err());
    }

    #[test]
    fn sigma_log_extreme_scale() {
        let p = params(1, 2, "0.5", 1.0);
        let v = sigma_log(LogScale::new(65536.0).unwrap(), &p);
        // -32768 + ln 65536, independent high-precision value
        assert!((v - (-32_756.909_645_111_04)).abs() < 1e-9, "{v}");
    }

    #[test]
    fn sigma_star_examples() {
        let p = params(1, 2, "0.5", 0.0);
        assert!((sigma_star(0.1, &p).unwrap() - 0.01).abs() < 1e-15);
        let q = params(1, 2, "1/3", 0.0);
        for r in [0.5, 0.1, 1e-3] {
            assert!((sigma_star(r, &q).unwrap() / r.powi(3) - 1.0).abs() < 1e-12);
        }
        let g = params(1, 2, "0.5", 0.4);
        let ratio = |r: f64| sigma(sigma_star(r, &g).unwrap(), &g).unwrap() / r;
        let (small, large) = (ratio(1e-6), ratio(1e-3));
        assert!((0.8..=1.2).contains(&small), "{small}");
        assert!((small - 1.0).abs() < (large - 1.0).abs());
    }

    #[test]
    fn gauge_examples() {
        let e = std::f64::consts::E;
        let crit = params(1, 2, "0.5", 0.5);
        assert!((f_gauge((-e).exp(), &crit).unwrap() - 1.0).abs() < 1e-12);
        assert!((f_gauge((-e * e).exp(), &crit).unwrap() - 2.0).abs() < 1e-12);
        assert!(f_gauge(0.5, &crit).is_err());
        let sub = params(1, 2, "0.5", 0.25);
        assert!((f_gauge((-8f64).exp(), &sub).unwrap() - 8f64.sqrt()).abs() < 1e-12);
        assert_eq!(psi(0.3, &crit).unwrap(), 1.0);
        let zero = params(1, 2, "0.5", 0.0);
        assert!((psi((-4f64).exp(), &zero).unwrap() - 4.0).abs() < 1e-12);
        assert!((psi(2f64.powi(-8), &sub).unwrap() - 2.354_820_045_030_949_4).abs() < 1e-12);
        assert!(psi(0.1, &params(1, 2, "0.5", 0.75)).is_err());
    }

    #[test]
    fn phi_examples() {
        let e = std::f64::consts::E;
        let p = params(1, 2, "0.5", 0.0);
        let s = LogScale::new(e.powf(e)).unwrap();
        let r = s.radius().unwrap();
        let direct = phi_gauge(r, &p).unwrap();
        assert!((direct / (r * r * e.powf(e)) - 1.0).abs() < 1e-12);
        assert!((phi_gauge_log(s, &p).unwrap() - direct.ln()).abs() < 1e-10);
        let crit = params(1, 2, "0.5", 0.5);
        let r: f64 = 1e-20;
        let lll = (-r.ln()).ln().ln();
        assert!((phi_gauge(r, &crit).unwrap() / (r * r * lll) - 1.0).abs() < 1e-12);
        let ratio = phi_gauge(1e-10, &p).unwrap() / 1e-20;
        assert!((ratio - 26.321_886_411_604_79).abs() < 1e-9, "{ratio}");
        assert!(ratio > 1.0);
        assert!(phi_gauge(0.1, &p).is_err());
    }

    #[test]
    fn classifier_examples() {
        let v = classify_polarity(&params(1, 2, "1/2", 0.5));
        assert_eq!(v.regime, Regime::Critical);
        assert!(v.points_polar && v.integral_diverges && !v.local_time_exists);
        let v = classify_polarity(&params(1, 2, "1/2", 0.75));
        assert_eq!(v.regime, Regime::Critical);
        assert!(!v.points_polar && !v.integral_diverges && v.local_time_exists);
        let v = classify_polarity(&params(2, 5, "0.5", -3.0));
        assert_eq!(v.regime, Regime::Supercritical);
        assert!(v.points_polar);
    }

    #[test]
    fn verdict_text() {
        let p = params(1, 2, "1/2", 0.5);
        assert_eq!(
            describe_verdict(&p, &classify_polarity(&p)),
            "critical, points polar, local time non-existent boundary case γ=1/d"
        );
        let q = params(1, 2, "1/2", 0.75);
        assert!(describe_verdict(&q, &classify_polarity(&q)).starts_with("critical, points NOT polar"));
    }

    #[test]
    fn integral_examples() {
        let r = truncated_integral(1, 1.0, 1, 1.0, 1e-6, 0.5).unwrap();
        let exact = (1e6f64).ln().ln() - 2f64.ln().ln();
        assert!((r.value - exact).abs() < 1e-8 * exact, "{} vs {exact}", r.value);
        assert!((exact - 2.992_304_835_057_675).abs() < 1e-12);

        let p = FieldParams::new(2, 2, "0.5".parse().unwrap(), 0.0, 0.5).unwrap();
        let c = integral_criterion(&p, 1e-3).unwrap();
        assert!((c.value - (0.5 - 1e-3)).abs() < 1e-10);
        assert!(!c.diverges);

        let q = params(1, 2, "1/2", 0.75);
        let a = integral_criterion(&q, 1e-4).unwrap();
        let b = integral_criterion(&q, 1e-8).unwrap();
        assert!(!a.diverges);
        assert!(b.value > a.value);
    }

    #[test]
    fn suff_trace_examples() {
        let e = std::f64::consts::E;
        let p = params(1, 3, "0.5", 0.0);
        let t = suff_condition_trace(&p, &[LogScale::new(e).unwrap(), LogScale::new(e * e).unwrap()]).unwrap();
        assert!(t[1].log_quotient > t[0].log_quotient);

        // critical: quotient equals loglog / (loglogloglog/N + log)^{γd}
        let c = params(1, 2, "1/2", 0.5);
        let lambdas: Vec<LogScale> = (0..40).map(|k| LogScale::new(e.powf(e) * 1.5f64.powi(k)).unwrap()).collect();
        let t = suff_condition_trace(&c, &lambdas).unwrap();
        for pt in &t {
            let l = pt.lambda;
            let display = l.ln() / (l.ln().ln() + l).powf(1.0);
            assert!((pt.quotient / display - 1.0).abs() < 1e-10);
        }
        assert!(t.windows(2).all(|w| w[1].quotient < w[0].quotient));

        let c0 = params(1, 2, "1/2", 0.0);
        let t = suff_condition_trace(&c0, &lambdas).unwrap();
        assert!(t.windows(2).all(|w| w[1].quotient > w[0].quotient));
        assert!(suff_condition_trace(&c0, &[LogScale::new(2.0).unwrap()]).is_err());
    }
}
