use super::decomposition::box_grid as grid;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_with_breaks, QuadOptions};
use crate::rng::split_seed;
use crate::spectral_field::{FieldSample, FieldSource, Lattice};
use crate::stats::{self, neumaier_sum};
use crate::variance_model::{classify_polarity, sigma, sigma_star, FieldParams};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

/// Default bandwidth ladder `n ∈ {1, 2, 4, …, 256}`.
pub fn default_mu_ladder() -> Vec<u64> {
    (0..=8).map(|k| 1u64 << k).collect()
}

fn check_box(lo: &[f64], hi: &[f64]) -> Result<()> {
    if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
        return Err(Error::domain("interval bounds must satisfy lo < hi on every axis"));
    }
    Ok(())
}

/// Product-trapezoid weights of the lattice sites in `[lo, hi]`: faces get
/// half weight per axis, so adjacent boxes add up exactly.
pub(crate) fn trapezoid_weights(lattice: &Lattice, lo: &[f64], hi: &[f64]) -> Result<Vec<(usize, f64)>> {
    check_box(lo, hi)?;
    if lo.len() != lattice.dim() {
        return Err(Error::domain("interval dimension differs from the lattice's"));
    }
    let h = lattice.spacing();
    let slack = 1e-9 * h;
    for a in 0..lattice.dim() {
        if lattice.lo(a) > lo[a] + slack || lattice.hi(a) < hi[a] - slack {
            return Err(Error::domain(format!("coverage violation: lattice does not cover axis {a} of the interval")));
        }
        let steps = (hi[a] - lo[a]) / h;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::domain("interval faces must fall on lattice sites"));
        }
    }
    let cell = lattice.cell_volume();
    Ok((0..lattice.len())
        .filter_map(|s| {
            let t = lattice.point(s);
            let mut w = cell;
            for (x, (a, b)) in t.iter().zip(lo.iter().zip(hi)) {
                if *x < a - slack || *x > b + slack {
                    return None;
                }
                if (x - a).abs() <= slack || (x - b).abs() <= slack {
                    w *= 0.5;
                }
            }
            Some((s, w))
        })
        .collect())
}

fn mu_density(x: &[f64], z: &[f64], n: f64) -> f64 {
    let d = z.len() as f64;
    let r2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
    (2.0 * PI * n).powf(d / 2.0) * (-n * r2 / 2.0).exp()
}

/// `μ_n(I) = ∫_I (2πn)^{d/2} exp(−n|X(t) − z|²/2) dt` by the lattice trapezoid rule.
pub fn mu_n_measure(field: &FieldSample, z: &[f64], lo: &[f64], hi: &[f64], n: u64) -> Result<f64> {
    if z.len() != field.components {
        return Err(Error::domain("target z must have d components"));
    }
    if n == 0 {
        return Err(Error::domain("bandwidth index n must be positive"));
    }
    let w = trapezoid_weights(&field.lattice, lo, hi)?;
    Ok(neumaier_sum(w.iter().map(|&(s, wt)| wt * mu_density(field.site_values(s), z, n as f64))))
}

/// Nested adaptive integral of `f` over a box (`N ≤ 3`).
fn integrate_box(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], opts: QuadOptions) -> Result<f64> {
    fn level(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], prefix: &mut Vec<f64>, opts: QuadOptions) -> Result<f64> {
        let a = prefix.len();
        if a == lo.len() {
            return Ok(f(prefix));
        }
        let mut failure = None;
        let q = integrate(
            |x| {
                prefix.push(x);
                let v = level(f, lo, hi, prefix, opts);
                prefix.pop();
                v.unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    0.0
                })
            },
            lo[a],
            hi[a],
            opts,
        )?;
        match failure {
            Some(e) => Err(e),
            None => Ok(q.value),
        }
    }
    if lo.len() > 3 {
        return Err(Error::domain("box quadrature supports N <= 3"));
    }
    level(f, lo, hi, &mut Vec::new(), opts)
}

fn variances_on(source: &FieldSource, lo: &[f64], hi: &[f64]) -> Result<Vec<(Vec<f64>, f64)>> {
    let pts = grid(lo, hi, 2000);
    pts.into_iter()
        .map(|t| {
            let v = source.covariance(&t, &t)?;
            Ok((t, v))
        })
        .collect()
}

/// Exact `E μ_n(I) = ∫_I (2π/(1/n + v(t)))^{d/2} exp(−|z|²/(2(1/n + v(t)))) dt`
/// with `v(t) = Var X₁(t)`.
pub fn mu_n_expectation(source: &FieldSource, z: &[f64], lo: &[f64], hi: &[f64], n: u64) -> Result<f64> {
    check_box(lo, hi)?;
    let d = source.params().d() as f64;
    let z2: f64 = z.iter().map(|x| x * x).sum();
    let inv_n = 1.0 / n as f64;
    integrate_box(
        &|t| {
            let s = inv_n + source.covariance(t, t).unwrap_or(f64::NAN);
            (2.0 * PI / s).powf(d / 2.0) * (-z2 / (2.0 * s)).exp()
        },
        lo,
        hi,
        QuadOptions::rel(1e-9),
    )
}

/// `∫_I (2π/(1 + c₁v(t)))^{d/2} exp(−|z|²/(2c₂v(t))) dt`. With
/// `c₁ = c₂ = 1` it is below `E μ_n(I)` for every `n ≥ 1`, since
/// `v ≤ 1/n + v ≤ 1 + v`.
pub fn mu_n_lower_bound(source: &FieldSource, z: &[f64], lo: &[f64], hi: &[f64], c1: f64, c2: f64) -> Result<f64> {
    check_box(lo, hi)?;
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::domain("constants c1, c2 must be positive"));
    }
    let d = source.params().d() as f64;
    let z2: f64 = z.iter().map(|x| x * x).sum();
    integrate_box(
        &|t| {
            let v = source.covariance(t, t).unwrap_or(f64::NAN);
            (2.0 * PI / (1.0 + c1 * v)).powf(d / 2.0) * (-z2 / (2.0 * c2 * v)).exp()
        },
        lo,
        hi,
        QuadOptions::rel(1e-9),
    )
}

/// Smallest observed `Var(X₁(t) | X₁(s)) / σ²(|t − s|)` over pairs of a grid on `I`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlndCalibration {
    pub c_hat: f64,
    pub worst_s: Vec<f64>,
    pub worst_t: Vec<f64>,
    pub pairs: usize,
}

pub fn calibrate_slnd_constant(source: &FieldSource, lo: &[f64], hi: &[f64], grid_points: usize) -> Result<SlndCalibration> {
    check_box(lo, hi)?;
    let params = source.params();
    let pts = grid(lo, hi, grid_points);
    let vars = pts.iter().map(|t| source.covariance(t, t)).collect::<Result<Vec<f64>>>()?;
    let mut best = (f64::INFINITY, 0, 0);
    let mut pairs = 0;
    for i in 0..pts.len() {
        for j in 0..pts.len() {
            if i == j {
                continue;
            }
            let r = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let c = source.covariance(&pts[i], &pts[j])?;
            let cond = vars[j] - c * c / vars[i];
            let ratio = cond / sigma(r, params)?.powi(2);
            pairs += 1;
            if ratio < best.0 {
                best = (ratio, i, j);
            }
        }
    }
    if pairs == 0 {
        return Err(Error::domain("calibration grid has no pairs"));
    }
    Ok(SlndCalibration { c_hat: best.0, worst_s: pts[best.1].clone(), worst_t: pts[best.2].clone(), pairs })
}

/// `(2π)^d / (v_min ĉ)^{d/2}` with `v_min = min_I Var X₁` and `ĉ` the
/// conditional-variance constant, turning `∬ σ^{−d}` into a bound on `E μ_n(I)²`.
pub fn second_moment_prefactor(source: &FieldSource, lo: &[f64], hi: &[f64], c_hat: f64) -> Result<f64> {
    if !(c_hat > 0.0) {
        return Err(Error::domain(format!("conditional variance constant {c_hat} must be positive")));
    }
    let v_min = variances_on(source, lo, hi)?.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if !(v_min > 0.0) {
        return Err(Error::domain("Var X1 vanishes on I; move I away from the origin"));
    }
    let d = source.params().d() as f64;
    Ok((2.0 * PI).powf(d) / (v_min * c_hat).powf(d / 2.0))
}

/// `B(r) = ∫_{S^{N−1}} ∏_j (L_j − r|ω_j|)_+ dω`, so that
/// `∬_{I×I} g(|t − s|) dt ds = ∫_0^{diam} g(r) r^{N−1} B(r) dr`.
pub(crate) fn box_shell_weight(sides: &[f64], r: f64) -> Result<f64> {
    let opts = QuadOptions::rel(1e-11);
    match sides {
        [l] => Ok(2.0 * (l - r).max(0.0)),
        [l1, l2] => {
            if r == 0.0 {
                return Ok(2.0 * PI * l1 * l2);
            }
            let a = (l1 / r).min(1.0).acos();
            let b = (l2 / r).min(1.0).asin();
            if a >= b {
                return Ok(0.0);
            }
            let q = integrate(|th: f64| (l1 - r * th.cos()).max(0.0) * (l2 - r * th.sin()).max(0.0), a, b, opts)?;
            Ok(4.0 * q.value)
        }
        [l1, l2, l3] => {
            if r == 0.0 {
                return Ok(4.0 * PI * l1 * l2 * l3);
            }
            let a = (l3 / r).min(1.0).acos();
            let mut failure = None;
            let q = integrate(
                |ph: f64| {
                    let inner = box_shell_weight(&[*l1, *l2], r * ph.sin()).unwrap_or_else(|e| {
                        failure.get_or_insert(e);
                        0.0
                    });
                    2.0 * (l3 - r * ph.cos()).max(0.0) * inner * ph.sin()
                },
                a,
                0.5 * PI,
                opts,
            )?;
            match failure {
                Some(e) => Err(e),
                None => Ok(q.value),
            }
        }
        _ => Err(Error::domain("pair integrals support N <= 3")),
    }
}

/// `∬_{I×I} σ^{−d}(|t − s|) dt ds`, or a divergence flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondMomentBound {
    pub diverges: bool,
    pub double_integral: Option<f64>,
    pub error_estimate: f64,
    /// Whether the primary scheme failed and the dyadic diagonal split was used.
    pub retried: bool,
}

impl SecondMomentBound {
    /// The bound on `E μ_n(I)²` for a given prefactor; `None` when divergent.
    pub fn bound(&self, prefactor: f64) -> Option<f64> {
        self.double_integral.map(|v| prefactor * v)
    }
}

/// The integral diverges exactly when points are polar (`d > N/H`, or
/// `d = N/H` with `γ ≤ 1/d`); otherwise it is evaluated in the variable
/// `s = log 1/|t − s|`, where the integrand `e^{−(N−Hd)s} s^{−γd} B(e^{−s})`
/// is smooth. If that fails, a dyadic split of the diagonal is tried once.
pub fn mu_n_second_moment_bound(params: &FieldParams, lo: &[f64], hi: &[f64]) -> Result<SecondMomentBound> {
    check_box(lo, hi)?;
    if lo.len() != params.n() {
        return Err(Error::domain("interval dimension differs from N"));
    }
    if lo.iter().zip(hi).all(|(a, b)| *a <= 0.0 && *b >= 0.0) {
        return Err(Error::domain("I must stay away from the origin"));
    }
    if classify_polarity(params).integral_diverges {
        return Ok(SecondMomentBound { diverges: true, double_integral: None, error_estimate: 0.0, retried: false });
    }
    let sides: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| b - a).collect();
    let diam = sides.iter().map(|l| l * l).sum::<f64>().sqrt();
    if params.gamma() != 0.0 && diam >= 1.0 {
        return Err(Error::domain(format!("diam I = {diam} must be below 1 when gamma != 0")));
    }
    match log_scheme(params, &sides, diam) {
        Ok((v, e)) => Ok(SecondMomentBound { diverges: false, double_integral: Some(v), error_estimate: e, retried: false }),
        Err(_) => {
            let (v, e) = dyadic_scheme(params, &sides, diam)?;
            Ok(SecondMomentBound { diverges: false, double_integral: Some(v), error_estimate: e, retried: true })
        }
    }
}

fn log_scheme(params: &FieldParams, sides: &[f64], diam: f64) -> Result<(f64, f64)> {
    let n = params.n() as f64;
    let d = params.d() as f64;
    let (h, g) = (params.h(), params.gamma());
    let kappa = n - h * d;
    let a = g * d;
    let s_lo = -diam.ln();
    // Kinks of B at r = L_j.
    let mut kinks: Vec<f64> = sides.iter().map(|l| -l.ln()).filter(|&s| s > s_lo).collect();
    let (s_hi, tail) = if kappa > 1e-12 {
        let span = (60.0 + 2.0 * a.abs() * (1.0 + 60.0 / kappa + s_lo.abs()).ln()) / kappa;
        (s_lo + span, 0.0)
    } else {
        // Critical with γd > 1: the integrand tends to B(0) s^{−γd}.
        let s_hi = (2.0 * s_lo).max(60.0);
        let b0 = box_shell_weight(sides, 0.0)?;
        (s_hi, b0 * s_hi.powf(1.0 - a) / (a - 1.0))
    };
    let mut breaks = vec![s_lo];
    let steps = ((s_hi - s_lo).ceil() as usize).max(1);
    breaks.extend((1..steps).map(|k| s_lo + (s_hi - s_lo) * k as f64 / steps as f64));
    breaks.push(s_hi);
    breaks.append(&mut kinks);
    breaks.sort_by(f64::total_cmp);
    let mut failure = None;
    let q = integrate_with_breaks(
        |s| {
            let b = box_shell_weight(sides, (-s).exp()).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                0.0
            });
            (-kappa * s).exp() * if a == 0.0 { 1.0 } else { s.powf(-a) } * b
        },
        &breaks,
        QuadOptions { rel_tol: 1e-11, max_intervals: 20_000, ..Default::default() },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((q.value + tail, q.error))
}

fn dyadic_scheme(params: &FieldParams, sides: &[f64], diam: f64) -> Result<(f64, f64)> {
    let n = params.n() as i32;
    let d = params.d() as i32;
    let mut breaks: Vec<f64> = (0..=160).rev().map(|k| diam * 0.5f64.powi(k)).collect();
    breaks.extend(sides.iter().copied().filter(|&l| l < diam));
    breaks.sort_by(f64::total_cmp);
    let r_min = breaks[0];
    let mut failure = None;
    let q = integrate_with_breaks(
        |r| {
            let b = box_shell_weight(sides, r).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                0.0
            });
            let s = sigma(r, params).unwrap_or(f64::NAN);
            r.powi(n - 1) * b / s.powi(d)
        },
        &breaks,
        QuadOptions { rel_tol: 1e-10, max_intervals: 40_000, ..Default::default() },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    // Leftover disc below r_min, with B ≈ B(0) and σ^{−d} r^{N−1} ≲ r^{N−1−Hd}.
    let kappa = params.n() as f64 - params.h() * params.d() as f64;
    let tail = box_shell_weight(sides, 0.0)? * r_min.powf(kappa) / kappa.max(1e-300);
    Ok((q.value, q.error + tail))
}

/// Per-path `μ_n(I)` over a bandwidth ladder.
#[derive(Debug, Clone, Serialize)]
pub struct MuStudy {
    pub ladder: Vec<u64>,
    pub z: Vec<f64>,
    pub spacing: f64,
    pub replications: usize,
    pub means: Vec<f64>,
    pub mean_squares: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub square_se: Vec<f64>,
    /// `values[path][k]` is `μ_{ladder[k]}(I)` on that path.
    #[serde(skip_serializing)]
    pub values: Vec<Vec<f64>>,
}

/// Lattice spacing rule for `μ_n`: `h ≤ σ*(n_max^{−1/2}/4)`, so one lattice
/// step moves the field by well under the kernel width.
pub fn mu_spacing_limit(params: &FieldParams, n_max: u64) -> Result<f64> {
    sigma_star(0.25 / (n_max as f64).sqrt(), params)
}

pub fn mu_n_study(
    source: &FieldSource,
    lattice: &Lattice,
    z: &[f64],
    lo: &[f64],
    hi: &[f64],
    ladder: &[u64],
    replications: usize,
    seed: u64,
) -> Result<MuStudy> {
    if ladder.is_empty() || ladder.contains(&0) {
        return Err(Error::domain("ladder must hold positive bandwidths"));
    }
    if replications < 2 {
        return Err(Error::domain("need at least 2 replications"));
    }
    let n_max = *ladder.iter().max().expect("non-empty");
    let limit = mu_spacing_limit(source.params(), n_max)?;
    if lattice.spacing() > limit * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "resolution rule violated: spacing {} exceeds sigma*(n_max^-1/2 / 4) = {limit}",
            lattice.spacing()
        )));
    }
    let weights = trapezoid_weights(lattice, lo, hi)?;
    let prepared = source.prepare(lattice)?;
    let values = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let f = prepared.sample(split_seed(seed, r))?;
            Ok(ladder
                .iter()
                .map(|&n| neumaier_sum(weights.iter().map(|&(s, w)| w * mu_density(f.site_values(s), z, n as f64))))
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let col = |k: usize, sq: bool| -> Vec<f64> { values.iter().map(|v| if sq { v[k] * v[k] } else { v[k] }).collect() };
    let k_range = 0..ladder.len();
    Ok(MuStudy {
        ladder: ladder.to_vec(),
        z: z.to_vec(),
        spacing: lattice.spacing(),
        replications,
        means: k_range.clone().map(|k| stats::mean(&col(k, false))).collect(),
        mean_squares: k_range.clone().map(|k| stats::mean(&col(k, true))).collect(),
        mean_se: k_range.clone().map(|k| stats::std_error(&col(k, false))).collect(),
        square_se: k_range.map(|k| stats::std_error(&col(k, true))).collect(),
        values,
    })
}

/// Tightness and Paley–Zygmund diagnostics for `μ_n(I)` along the ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakLimitReport {
    pub ladder: Vec<u64>,
    pub medians: Vec<f64>,
    /// `C̄₁ = min_n` sample mean of `μ_n(I)`.
    pub c1_bar: f64,
    /// `C̄₂ = max_n` sample mean of `μ_n(I)²`.
    pub c2_bar: f64,
    /// Fraction of paths with `inf_n μ_n(I) ≥ C̄₁/2`.
    pub fraction_above: f64,
    pub fraction_se: f64,
    /// `C̄₁² / (8 C̄₂)`.
    pub pz_floor: f64,
    /// `fraction_above ≥ pz_floor − 3 SE`.
    pub consistent: bool,
    /// Median of `max_n μ_n / min_n μ_n` over paths.
    pub median_fluctuation: f64,
    /// Strictly decreasing from the peak median onward, ending below the first;
    /// small `n` sits in a transient where `(2πn)^{d/2}` still dominates.
    pub medians_decreasing: bool,
    /// Not tight when medians increase strictly along the ladder and at least double.
    pub tight: bool,
}

pub fn weak_limit_witness(ladder: &[u64], values: &[Vec<f64>]) -> Result<WeakLimitReport> {
    if ladder.len() < 4 {
        return Err(Error::domain(format!("ladder too short: {} values, need at least 4", ladder.len())));
    }
    if values.is_empty() || values.iter().any(|v| v.len() != ladder.len()) {
        return Err(Error::domain("every path needs one value per ladder entry"));
    }
    let paths = values.len();
    let k = ladder.len();
    let col = |j: usize| -> Vec<f64> { values.iter().map(|v| v[j]).collect() };
    let medians: Vec<f64> = (0..k).map(|j| stats::median(&col(j))).collect();
    let c1_bar = (0..k).map(|j| stats::mean(&col(j))).fold(f64::INFINITY, f64::min);
    let c2_bar = (0..k)
        .map(|j| stats::mean(&col(j).iter().map(|x| x * x).collect::<Vec<_>>()))
        .fold(0.0, f64::max);
    let above = values
        .iter()
        .filter(|v| v.iter().copied().fold(f64::INFINITY, f64::min) >= 0.5 * c1_bar)
        .count();
    let fraction_above = above as f64 / paths as f64;
    let fraction_se = (fraction_above * (1.0 - fraction_above) / paths as f64).sqrt();
    let pz_floor = if c2_bar > 0.0 { c1_bar * c1_bar / (8.0 * c2_bar) } else { 0.0 };
    let fluct: Vec<f64> = values
        .iter()
        .map(|v| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(0.0, f64::max);
            if lo > 0.0 { hi / lo } else { f64::INFINITY }
        })
        .collect();
    let increasing = medians.windows(2).all(|w| w[1] > w[0]);
    let peak = (0..k).fold(0, |best, j| if medians[j] > medians[best] { j } else { best });
    let medians_decreasing = peak + 1 < k
        && medians[peak..].windows(2).all(|w| w[1] < w[0])
        && medians[k - 1] < medians[0];
    Ok(WeakLimitReport {
        ladder: ladder.to_vec(),
        c1_bar,
        c2_bar,
        fraction_above,
        fraction_se,
        pz_floor,
        consistent: fraction_above >= pz_floor - 3.0 * fraction_se,
        median_fluctuation: stats::median(&fluct),
        medians_decreasing,
        tight: !(increasing && medians[k - 1] >= 2.0 * medians[0]),
        medians,
    })
}

/// CSV with header `n,mean_mu,mean_mu_sq,bound`; the `bound` column is
/// dropped when the second-moment integral diverges.
pub fn write_mu_csv<W: Write>(w: W, study: &MuStudy, bound: Option<f64>) -> Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    match bound {
        Some(_) => out.write_record(["n", "mean_mu", "mean_mu_sq", "bound"])?,
        None => out.write_record(["n", "mean_mu", "mean_mu_sq"])?,
    }
    for (k, n) in study.ladder.iter().enumerate() {
        let mut row = vec![n.to_string(), study.means[k].to_string(), study.mean_squares[k].to_string()];
        if let Some(b) = bound {
            row.push(b.to_string());
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}
