//! Bessel `J0` and the angular kernels `A_N(x) = ∫_{S^{N−1}} (2 − 2cos(x θ₁)) dθ`.

use std::f64::consts::{FRAC_PI_4, PI};

const TRAPEZOID_LIMIT: f64 = 50.0;
const TRAPEZOID_NODES: usize = 80;

/// Trapezoid rule for `(1/π)∫_0^π g(x sin θ) dθ`; the integrand is smooth and
/// periodic, so convergence is geometric once the node count exceeds `x/2`.
fn angular_mean<F: Fn(f64) -> f64>(x: f64, g: F) -> f64 {
    let m = TRAPEZOID_NODES;
    let step = PI / m as f64;
    // endpoints contribute g(0) each with half weight
    let mut s = g(0.0);
    for k in 1..m {
        s += g(x * (k as f64 * step).sin());
    }
    s / m as f64
}

/// Bessel function of the first kind of order zero.
pub fn j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= TRAPEZOID_LIMIT {
        return angular_mean(x, f64::cos);
    }
    // Hankel asymptotic expansion with a_k = a_{k−1}·(−(2k−1)²)/(8k)
    let w = x - FRAC_PI_4;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut xk = 1.0;
    for k in 1..60 {
        let kk = k as f64;
        a *= -(2.0 * kk - 1.0).powi(2) / (8.0 * kk);
        xk *= x;
        let term = a / xk;
        // even k: cos series with sign (−1)^{k/2}; odd k: sin series with sign (−1)^{(k−1)/2}
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if term.abs() < 1e-18 {
            break;
        }
    }
    (2.0 / (PI * x)).sqrt() * (p * w.cos() - q * w.sin())
}

/// `A_N(x)` for `N ∈ {1, 2, 3}`, evaluated without cancellation for small `x`.
pub fn angular_kernel(n: usize, x: f64) -> f64 {
    let x = x.abs();
    match n {
        1 => {
            let s = (0.5 * x).sin();
            8.0 * s * s
        }
        2 => {
            if x <= TRAPEZOID_LIMIT {
                // 2 − 2J0(x) = (1/π)∫ 4 sin²(x sin θ / 2) dθ
                2.0 * PI * angular_mean(x, |y| {
                    let s = (0.5 * y).sin();
                    4.0 * s * s
                })
            } else {
                2.0 * PI * (2.0 - 2.0 * j0(x))
            }
        }
        3 => {
            let one_minus_sinc = if x < 0.1 {
                let x2 = x * x;
                x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
            } else {
                1.0 - x.sin() / x
            };
            8.0 * PI * one_minus_sinc
        }
        _ => panic!("angular kernel implemented for N <= 3 only"),
    }
}

/// Surface measure of the unit sphere `S^{N−1}`.
pub fn sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            let half = n as f64 / 2.0;
            2.0 * PI.powf(half) / statrs::function::gamma::gamma(half)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j0_reference_values() {
        // reference values from 30-digit arithmetic
        let cases = [
            (0.0, 1.0),
            (1.0, 0.765_197_686_557_966_6),
            (10.0, -0.245_935_764_451_348_3),
            (49.9, 0.045_788_625_467_906_905),
            (50.1, 0.065_258_901_067_197_57),
            (123.4, -0.071_525_536_719_260_15),
        ];
        for (x, want) in cases {
            assert!((j0(x) - want).abs() < 1e-13, "J0({x}) = {} vs {want}", j0(x));
        }
    }

    #[test]
    fn kernels_match_closed_forms() {
        for &x in &[1e-6, 0.05, 0.3, 2.0, 17.0, 60.0] {
            let k2 = 2.0 * PI * (2.0 - 2.0 * j0(x));
            if x > 0.01 {
                assert!((angular_kernel(2, x) / k2 - 1.0).abs() < 1e-11, "x = {x}");
            }
            let k3 = 8.0 * PI * (1.0 - x.sin() / x);
            if x > 0.01 {
                assert!((angular_kernel(3, x) / k3 - 1.0).abs() < 1e-10, "x = {x}");
            }
        }
        // small-x leading terms
        let x = 1e-5;
        assert!((angular_kernel(1, x) / (2.0 * x * x) - 1.0).abs() < 1e-9);
        assert!((angular_kernel(2, x) / (PI * x * x) - 1.0).abs() < 1e-9);
        assert!((angular_kernel(3, x) / (4.0 * PI * x * x / 3.0) - 1.0).abs() < 1e-9);
    }
}
