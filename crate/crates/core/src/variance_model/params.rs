use crate::error::{Error, Result};
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

/// Tolerance for float comparisons of `d·H` against `N` and of `γ·d` against 1.
pub const CRITICAL_TOL: f64 = 1e-12;

/// Hurst index, optionally carrying an exact rational form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hurst {
    value: f64,
    ratio: Option<(u64, u64)>,
}

impl Hurst {
    pub fn rational(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 || num >= den {
            return Err(Error::domain(format!("H = {num}/{den} must lie strictly between 0 and 1")));
        }
        let g = gcd(num, den);
        Ok(Hurst { value: num as f64 / den as f64, ratio: Some((num / g, den / g)) })
    }

    pub fn float(value: f64) -> Result<Self> {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::domain(format!("H = {value} must lie strictly between 0 and 1")));
        }
        Ok(Hurst { value, ratio: None })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn ratio(&self) -> Option<(u64, u64)> {
        self.ratio
    }
}

impl FromStr for Hurst {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let num = a.trim().parse::<u64>().map_err(|_| Error::domain(format!("bad rational H '{s}'")))?;
            let den = b.trim().parse::<u64>().map_err(|_| Error::domain(format!("bad rational H '{s}'")))?;
            Hurst::rational(num, den)
        } else {
            let v = s.parse::<f64>().map_err(|_| Error::domain(format!("bad H '{s}'")))?;
            Hurst::float(v)
        }
    }
}

impl fmt::Display for Hurst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.ratio {
            Some((p, q)) => write!(f, "{p}/{q}"),
            None => write!(f, "{}", self.value),
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Parse a real number given either as a decimal or as `p/q`.
pub fn parse_real(s: &str) -> Result<f64> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let num = a.trim().parse::<f64>().map_err(|_| Error::domain(format!("bad number '{s}'")))?;
        let den = b.trim().parse::<f64>().map_err(|_| Error::domain(format!("bad number '{s}'")))?;
        if den == 0.0 {
            return Err(Error::domain(format!("zero denominator in '{s}'")));
        }
        Ok(num / den)
    } else {
        s.parse::<f64>().map_err(|_| Error::domain(format!("bad number '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

/// Domain dimension `N`, range dimension `d`, index `H`, log exponent `γ`
/// and scale cutoff `δ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldParams {
    n: usize,
    d: usize,
    h: Hurst,
    gamma: f64,
    delta0: f64,
}

impl FieldParams {
    pub fn new(n: usize, d: usize, h: Hurst, gamma: f64, delta0: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("N must be at least 1"));
        }
        if d == 0 {
            return Err(Error::domain("d must be at least 1"));
        }
        if !gamma.is_finite() {
            return Err(Error::domain("gamma must be finite"));
        }
        if !(delta0 > 0.0 && delta0 <= 1.0) {
            return Err(Error::domain(format!("delta0 = {delta0} must lie in (0, 1]")));
        }
        Ok(FieldParams { n, d, h, gamma, delta0 })
    }

    /// Convenience constructor with `δ₀ = 1/2`.
    pub fn with_defaults(n: usize, d: usize, h: Hurst, gamma: f64) -> Result<Self> {
        Self::new(n, d, h, gamma, 0.5)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn hurst(&self) -> Hurst {
        self.h
    }
    pub fn h(&self) -> f64 {
        self.h.value()
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.n, self.d, self.h, gamma, self.delta0)
    }

    pub fn with_d(&self, d: usize) -> Result<Self> {
        Self::new(self.n, d, self.h, self.gamma, self.delta0)
    }

    /// Position of `d` relative to `N/H`.
    pub fn regime(&self) -> Regime {
        let ord = match self.h.ratio() {
            // d·p/q vs N  <=>  d·p vs N·q
            Some((p, q)) => (self.d as u128 * p as u128).cmp(&(self.n as u128 * q as u128)),
            None => {
                let diff = self.d as f64 * self.h() - self.n as f64;
                if diff.abs() <= CRITICAL_TOL {
                    std::cmp::Ordering::Equal
                } else if diff < 0.0 {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Greater
                }
            }
        };
        match ord {
            std::cmp::Ordering::Less => Regime::Subcritical,
            std::cmp::Ordering::Equal => Regime::Critical,
            std::cmp::Ordering::Greater => Regime::Supercritical,
        }
    }

    pub fn critical(&self) -> bool {
        self.regime() == Regime::Critical
    }

    /// `γ·d == 1` within tolerance.
    pub fn gamma_at_threshold(&self) -> bool {
        (self.gamma * self.d as f64 - 1.0).abs() <= CRITICAL_TOL
    }

    /// `γ < 1/d` or at the threshold.
    pub fn gamma_at_most_threshold(&self) -> bool {
        self.gamma * self.d as f64 <= 1.0 + CRITICAL_TOL
    }

    /// Exponent `1 − γd` of the log factor in `Ψ` and `φ` (exactly 0 at the threshold).
    pub fn log_exponent(&self) -> f64 {
        if self.gamma_at_threshold() {
            0.0
        } else {
            1.0 - self.gamma * self.d as f64
        }
    }
}

impl fmt::Display for FieldParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={} d={} H={} gamma={} delta0={}", self.n, self.d, self.h, self.gamma, self.delta0)
    }
}

/// A radius represented through `λ = log(1/r)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct LogScale {
    lambda: f64,
}

/// Largest `λ` for which `exp(−λ)` is materialized as a float.
pub const MAX_MATERIALIZED_LAMBDA: f64 = 700.0;

impl LogScale {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::domain(format!("log scale lambda = {lambda} must be finite and positive")));
        }
        Ok(LogScale { lambda })
    }

    pub fn from_radius(r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::domain(format!("radius {r} must lie in (0, 1)")));
        }
        Self::new(-r.ln())
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `exp(−λ)`, refused beyond the materialization limit.
    pub fn radius(&self) -> Result<f64> {
        if self.lambda > MAX_MATERIALIZED_LAMBDA {
            return Err(Error::domain(format!(
                "radius exp(-{}) is below the materialization limit exp(-{MAX_MATERIALIZED_LAMBDA})",
                self.lambda
            )));
        }
        Ok((-self.lambda).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_hurst_is_reduced_and_parsed() {
        let h: Hurst = "2/4".parse().unwrap();
        assert_eq!(h.ratio(), Some((1, 2)));
        assert_eq!(h.to_string(), "1/2");
        assert!("1/1".parse::<Hurst>().is_err());
        assert!("0".parse::<Hurst>().is_err());
        assert_eq!("0.25".parse::<Hurst>().unwrap().value(), 0.25);
    }

    #[test]
    fn rational_criticality_is_exact() {
        let p = FieldParams::new(1, 3, Hurst::rational(1, 3).unwrap(), 0.0, 0.5).unwrap();
        assert_eq!(p.regime(), Regime::Critical);
        let q = FieldParams::new(1, 3, Hurst::float(1.0 / 3.0 + 1e-9).unwrap(), 0.0, 0.5).unwrap();
        assert_eq!(q.regime(), Regime::Supercritical);
        let r = FieldParams::new(1, 3, Hurst::float(1.0 / 3.0).unwrap(), 0.0, 0.5).unwrap();
        assert_eq!(r.regime(), Regime::Critical);
    }

    #[test]
    fn log_scale_guards_materialization() {
        assert!(LogScale::new(701.0).unwrap().radius().is_err());
        assert!((LogScale::new(1.0).unwrap().radius().unwrap() - (-1f64).exp()).abs() < 1e-16);
        assert!(LogScale::new(0.0).is_err());
        assert!(LogScale::from_radius(1.0).is_err());
    }
}
