use super::special::{angular_kernel, sphere_area};
use crate::error::{Error, Result};
use crate::quadrature::{gk21, integrate, QuadOptions};
use crate::variance_model::{sigma, FieldParams};
use std::f64::consts::{E, PI};
use std::sync::{Arc, OnceLock};

/// Isotropic spectral density `h(ξ) = c |ξ|^{−2H−N} (log(e + |ξ|))^{2γ}`.
///
/// The variogram is `V(ℓ) = c ℓ^{2H} G(ℓ)` with the shape integral
/// `G(ℓ) = ∫_0^∞ A_N(u) u^{−1−2H} (log(e + u/ℓ))^{2γ} du`; `G` is constant
/// when `γ = 0` and otherwise tabulated on a log-lag grid.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    params: FieldParams,
    c_norm: f64,
    shape: Arc<OnceLock<ShapeTable>>,
}

#[derive(Debug)]
enum ShapeTable {
    Constant(f64),
    Grid { x0: f64, dx: f64, log_g: Vec<f64> },
}

const TABLE_LOG_MIN: f64 = -32.0;
const TABLE_LOG_MAX: f64 = 8.0;
const TABLE_STEP: f64 = 0.0625;
/// Number of full periods integrated panel by panel before switching to the
/// asymptotic tail.
const OSCILLATORY_PERIODS: usize = 512;

impl SpectralModel {
    pub fn new(params: FieldParams, c_norm: f64) -> Result<Self> {
        if params.n() > 3 {
            return Err(Error::domain(format!("spectral synthesis supports N <= 3, got N = {}", params.n())));
        }
        if !(c_norm > 0.0 && c_norm.is_finite()) {
            return Err(Error::domain(format!("c_norm = {c_norm} must be positive and finite")));
        }
        Ok(SpectralModel { params, c_norm, shape: Arc::new(OnceLock::new()) })
    }

    /// Model whose variogram equals `σ²` at `reference_lag`.
    pub fn calibrated(params: FieldParams, reference_lag: f64) -> Result<Self> {
        let unit = Self::new(params, 1.0)?;
        let v = unit.variogram(reference_lag)?;
        let target = sigma(reference_lag, &params)?.powi(2);
        let mut m = unit;
        m.c_norm = target / v;
        Ok(m)
    }

    /// Same density shape with a rescaled normalization.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::domain("rescaling factor must be positive"));
        }
        Ok(SpectralModel { params: self.params, c_norm: self.c_norm * factor, shape: Arc::clone(&self.shape) })
    }

    pub fn params(&self) -> &FieldParams {
        &self.params
    }
    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }
    pub fn density_exponent(&self) -> f64 {
        2.0 * self.params.h() + self.params.n() as f64
    }
    pub fn log_exponent(&self) -> f64 {
        2.0 * self.params.gamma()
    }
    pub fn description(&self) -> String {
        format!(
            "h(xi) = {:e} |xi|^-{} (log(e+|xi|))^{} on R^{}",
            self.c_norm,
            self.density_exponent(),
            self.log_exponent(),
            self.params.n()
        )
    }

    /// Density at a frequency of norm `rho > 0`.
    pub fn density(&self, rho: f64) -> f64 {
        self.c_norm * rho.powf(-self.density_exponent()) * (E + rho).ln().powf(self.log_exponent())
    }

    /// `∫ ρ^{N−1+k} h(ρ) dρ` over `[lo, hi]`, by substitution `ρ = e^s`.
    fn radial_moment(&self, k: f64, lo: f64, hi: f64) -> Result<f64> {
        let two_h = 2.0 * self.params.h();
        let le = self.log_exponent();
        let f = move |s: f64| ((k - two_h) * s).exp() * (E + s.exp()).ln().powf(le);
        let (a, b) = (lo.ln(), hi.ln());
        if b - a < 0.05 {
            let mut g = f;
            return Ok(self.c_norm * gk21(&mut g, a, b).0);
        }
        Ok(self.c_norm * integrate(f, a, b, QuadOptions::rel(1e-12))?.value)
    }

    /// Radial mass `∫_lo^hi ρ^{N−1} h(ρ) dρ` of a spherical shell (per unit solid angle).
    pub fn radial_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        self.radial_moment(0.0, lo, hi)
    }

    /// `∫_lo^hi ρ^{N+1} h(ρ) dρ`.
    pub fn radial_second_moment(&self, lo: f64, hi: f64) -> Result<f64> {
        self.radial_moment(2.0, lo, hi)
    }

    /// Radial mass beyond `xi`.
    pub fn tail_mass(&self, xi: f64) -> Result<f64> {
        let span = 46.0 / (2.0 * self.params.h()) + 4.0 * self.log_exponent().abs();
        self.radial_moment(0.0, xi, xi * span.exp())
    }

    /// `∫_0^xi ρ^{N+1} h(ρ) dρ`.
    pub fn low_second_moment(&self, xi: f64) -> Result<f64> {
        let span = 46.0 / (2.0 - 2.0 * self.params.h());
        self.radial_moment(2.0, xi * (-span).exp(), xi)
    }

    /// Contribution `2|S^{N−1}| ∫_xi^∞ ρ^{N−1} h` of frequencies above `xi` to the
    /// variogram at lags much longer than `1/xi`.
    pub fn high_frequency_variance(&self, xi: f64) -> Result<f64> {
        Ok(2.0 * sphere_area(self.params.n()) * self.tail_mass(xi)?)
    }

    /// Shape integral `G(ℓ)` by direct quadrature.
    pub fn shape_direct(&self, lag: f64) -> Result<f64> {
        if !(lag > 0.0 && lag.is_finite()) {
            return Err(Error::domain(format!("lag {lag} must be positive and finite")));
        }
        let n = self.params.n();
        let h = self.params.h();
        let le = self.log_exponent();
        let log_factor = |u: f64| (E + u / lag).ln().powf(le);
        let g = |u: f64| u.powf(-1.0 - 2.0 * h) * log_factor(u);

        // (0, 1] in log variable; the integrand decays like e^{(2−2H)s}
        let s_min = -46.0 / (2.0 - 2.0 * h) - 4.0;
        let near = integrate(
            |s: f64| {
                let u = s.exp();
                angular_kernel(n, u) * (-2.0 * h * s).exp() * log_factor(u)
            },
            s_min,
            0.0,
            QuadOptions::rel(1e-13),
        )?
        .value;

        // [1, U] panel by panel over full periods
        let two_pi = 2.0 * PI;
        let mut mid = 0.0;
        let mut f = |u: f64| angular_kernel(n, u) * g(u);
        mid += gk21(&mut f, 1.0, two_pi).0;
        for j in 1..OSCILLATORY_PERIODS {
            let a = two_pi * j as f64;
            mid += gk21(&mut f, a, a + two_pi).0;
        }
        let u_max = two_pi * OSCILLATORY_PERIODS as f64;

        // non-oscillating mean of the kernel over [U, ∞)
        let mean_kernel = 2.0 * sphere_area(n);
        let span = 46.0 / (2.0 * h) + 4.0 * le.abs();
        let lu = u_max.ln();
        let mean_tail = mean_kernel
            * integrate(|s: f64| (-2.0 * h * s).exp() * log_factor(s.exp()), lu, lu + span, QuadOptions::rel(1e-13))?
                .value;

        // leading asymptotic terms of the oscillating remainder (U is a multiple of 2π)
        let deriv = |fun: &dyn Fn(f64) -> f64, u: f64| {
            let du = u * 1e-4;
            (fun(u + du) - fun(u - du)) / (2.0 * du)
        };
        let osc_tail = match n {
            // −4∫cos(u) g ≈ 4 g'(U)
            1 => 4.0 * deriv(&g, u_max),
            // −4π∫J0 g with J0 ≈ √(2/πu) cos(u − π/4)
            2 => {
                let amp = |u: f64| (2.0 / (PI * u)).sqrt() * g(u);
                -4.0 * PI * std::f64::consts::FRAC_1_SQRT_2 * (amp(u_max) - deriv(&amp, u_max))
            }
            // −8π∫ sin(u) g/u ≈ −8π g(U)/U
            _ => -8.0 * PI * g(u_max) / u_max,
        };
        let total = near + mid + mean_tail + osc_tail;
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::numerical(format!("variogram shape integral failed at lag {lag}: {total}")));
        }
        Ok(total)
    }

    fn shape_table(&self) -> Result<&ShapeTable> {
        if let Some(t) = self.shape.get() {
            return Ok(t);
        }
        let table = if self.log_exponent() == 0.0 {
            ShapeTable::Constant(self.shape_direct(1.0)?)
        } else {
            let count = ((TABLE_LOG_MAX - TABLE_LOG_MIN) / TABLE_STEP).round() as usize + 1;
            let log_g = (0..count)
                .map(|i| self.shape_direct((TABLE_LOG_MIN + i as f64 * TABLE_STEP).exp()).map(f64::ln))
                .collect::<Result<Vec<_>>>()?;
            ShapeTable::Grid { x0: TABLE_LOG_MIN, dx: TABLE_STEP, log_g }
        };
        Ok(self.shape.get_or_init(|| table))
    }

    /// Shape integral `G(ℓ)`, interpolated from the table where available.
    pub fn shape(&self, lag: f64) -> Result<f64> {
        match self.shape_table()? {
            ShapeTable::Constant(g) => Ok(*g),
            ShapeTable::Grid { x0, dx, log_g } => {
                let x = lag.ln();
                let pos = (x - x0) / dx;
                let n = log_g.len();
                if !(pos >= 1.0 && pos <= (n - 3) as f64) {
                    return self.shape_direct(lag);
                }
                let i = pos.floor() as usize;
                let t = pos - i as f64;
                // cubic Lagrange through four neighbours
                let (p0, p1, p2, p3) = (log_g[i - 1], log_g[i], log_g[i + 1], log_g[i + 2]);
                let v = -p0 * t * (t - 1.0) * (t - 2.0) / 6.0 + p1 * (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
                    - p2 * (t + 1.0) * t * (t - 2.0) / 2.0
                    + p3 * (t + 1.0) * t * (t - 1.0) / 6.0;
                Ok(v.exp())
            }
        }
    }

    /// `V(ℓ) = E|X(t+ℓe) − X(t)|²` for one component.
    pub fn variogram(&self, lag: f64) -> Result<f64> {
        let lag = lag.abs();
        if lag == 0.0 {
            return Ok(0.0);
        }
        Ok(self.c_norm * lag.powf(2.0 * self.params.h()) * self.shape(lag)?)
    }

    /// Variogram by direct quadrature (no table).
    pub fn variogram_direct(&self, lag: f64) -> Result<f64> {
        let lag = lag.abs();
        if lag == 0.0 {
            return Ok(0.0);
        }
        Ok(self.c_norm * lag.powf(2.0 * self.params.h()) * self.shape_direct(lag)?)
    }

    /// `R(s,t) = E[X₁(s) X₁(t)] = ½(V(|s|) + V(|t|) − V(|s−t|))`.
    pub fn covariance(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        if s.len() != self.params.n() || t.len() != self.params.n() {
            return Err(Error::domain("covariance points must have the field's domain dimension"));
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
        Ok(0.5 * (self.variogram(norm(s))? + self.variogram(norm(t))? - self.variogram(norm(&diff))?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variance_model::Hurst;

    fn model(n: usize, h: f64, gamma: f64) -> SpectralModel {
        let p = FieldParams::new(n, 1, Hurst::float(h).unwrap(), gamma, 0.5).unwrap();
        SpectralModel::new(p, 1.0).unwrap()
    }

    #[test]
    fn brownian_shape_constant_is_two_pi() {
        // V(ℓ) = 2∫(2−2cos ℓξ) ξ^{−2} dξ over ξ>0 = 2π|ℓ|
        let m = model(1, 0.5, 0.0);
        let g = m.shape_direct(1.0).unwrap();
        assert!((g / (2.0 * PI) - 1.0).abs() < 1e-9, "{g}");
    }

    #[test]
    fn fbm_shape_constant_matches_closed_form() {
        // ∫_0^∞ 4(1 − cos u) u^{−1−2H} du = 2π / (Γ(2H+1) sin(πH))
        for h in [0.3, 0.7] {
            let m = model(1, h, 0.0);
            let g = m.shape_direct(1.0).unwrap();
            let want = 2.0 * PI / (statrs::function::gamma::gamma(2.0 * h + 1.0) * (PI * h).sin());
            assert!((g / want - 1.0).abs() < 1e-8, "H={h}: {g} vs {want}");
        }
    }

    #[test]
    fn higher_dimensional_shapes_match_closed_form() {
        // ∫ A_N(u) u^{−1−2H} du for H = 1/2
        for n in [2usize, 3] {
            let m = model(n, 0.5, 0.0);
            let g = m.shape_direct(1.0).unwrap();
            let want = match n {
                // 4π ∫(1 − J0(u))/u² du = 4π
                2 => 4.0 * PI,
                // 8π ∫ (1 − sin u/u)/u² du = 8π · π/4
                _ => 2.0 * PI * PI,
            };
            assert!((g / want - 1.0).abs() < 1e-8, "N={n}: {g} vs {want}");
        }
    }

    #[test]
    fn table_matches_direct_quadrature() {
        let m = model(1, 0.5, 0.5);
        for &lag in &[1e-9, 3.3e-5, 0.01, 0.123, 0.77] {
            let a = m.variogram(lag).unwrap();
            let b = m.variogram_direct(lag).unwrap();
            assert!((a / b - 1.0).abs() < 1e-8, "lag {lag}: {a} vs {b}");
        }
    }

    #[test]
    fn calibration_hits_reference() {
        let p = FieldParams::new(1, 2, Hurst::rational(1, 2).unwrap(), 0.0, 0.5).unwrap();
        let m = SpectralModel::calibrated(p, 1.0 / 64.0).unwrap();
        assert!((m.c_norm() * 2.0 * PI - 1.0).abs() < 1e-9);
        let c = m.covariance(&[0.3], &[0.5]).unwrap();
        assert!((c - 0.3).abs() < 1e-9);
    }
}
