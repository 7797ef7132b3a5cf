use crate::error::{Error, Result};
use crate::rng::split_seed;
use crate::spectral_field::{FieldSample, FieldSource, Lattice};
use crate::stats::{self, linear_fit};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;

/// Maximum number of halvings of `ρ₀` before giving up.
pub const MAX_HALVINGS: u32 = 40;
/// Grid size used to check `1/2 ≤ α ≤ 3/2` on `I`.
pub const ALPHA_GRID_POINTS: usize = 1000;

/// `X = X⁽¹⁾ + X⁽²⁾` with `X⁽²⁾(t) = α(t) X(t₀)` and
/// `α(t) = E[X_j(t)X_j(t₀)] / E[X_j(t₀)²]`, on the box `I = t₀ ± ρ₀/2`.
#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    #[serde(skip_serializing)]
    pub source: FieldSource,
    pub t0: Vec<f64>,
    pub rho0: f64,
    pub initial_rho0: f64,
    pub halvings: u32,
    pub var_t0: f64,
    /// Range of `α` over the check grid of `I`.
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Empirical Hölder exponent of `α` at `t₀` (fit of `log|α − 1|` on `log|t − t₀|`).
    pub alpha_holder_exponent: Option<f64>,
}

pub(crate) fn box_grid(lo: &[f64], hi: &[f64], total: usize) -> Vec<Vec<f64>> {
    let n = lo.len();
    let m = ((total as f64).powf(1.0 / n as f64).ceil() as usize).max(2);
    let mut pts = vec![Vec::new()];
    for a in 0..n {
        pts = pts
            .into_iter()
            .flat_map(|p: Vec<f64>| {
                (0..m).map(move |i| {
                    let mut q = p.clone();
                    q.push(lo[a] + (hi[a] - lo[a]) * i as f64 / (m - 1) as f64);
                    q
                })
            })
            .collect();
    }
    pts
}

impl Decomposition {
    /// `α(t)`, equal to 1 at `t₀` by definition.
    pub fn alpha(&self, t: &[f64]) -> Result<f64> {
        if t == self.t0.as_slice() {
            return Ok(1.0);
        }
        Ok(self.source.covariance(t, &self.t0)? / self.var_t0)
    }

    /// Bounds of `I`.
    pub fn interval(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.t0.iter().map(|c| c - 0.5 * self.rho0).collect(),
            self.t0.iter().map(|c| c + 0.5 * self.rho0).collect(),
        )
    }

    /// Grid of about `points` points on `I`.
    pub fn grid(&self, points: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.interval();
        box_grid(&lo, &hi, points)
    }

    /// `α` at every site of `lattice`, with the site of `t₀`.
    pub fn plan(&self, lattice: &Lattice) -> Result<SplitPlan> {
        if lattice.dim() != self.t0.len() {
            return Err(Error::domain("lattice dimension differs from the anchor's"));
        }
        let tol = 1e-9 * lattice.spacing();
        let t0_site = (0..lattice.len())
            .find(|&s| lattice.point(s).iter().zip(&self.t0).all(|(a, b)| (a - b).abs() <= tol))
            .ok_or_else(|| Error::domain(format!("t0 = {:?} is off-lattice", self.t0)))?;
        let alpha = (0..lattice.len())
            .map(|s| if s == t0_site { Ok(1.0) } else { self.alpha(&lattice.point(s)) })
            .collect::<Result<Vec<f64>>>()?;
        Ok(SplitPlan { t0_site, alpha })
    }
}

/// Anchor `t₀ ≠ 0` and initial diameter `ρ₀`; `ρ₀` is halved until `I`
/// excludes the origin and `1/2 ≤ α ≤ 3/2` on a grid of `I`.
pub fn make_decomposition(source: &FieldSource, t0: &[f64], rho0: f64) -> Result<Decomposition> {
    if t0.len() != source.params().n() {
        return Err(Error::domain("t0 must have the field's domain dimension"));
    }
    if t0.iter().all(|&c| c == 0.0) {
        return Err(Error::domain("the anchor t0 must differ from the origin"));
    }
    if !(rho0 > 0.0 && rho0.is_finite()) {
        return Err(Error::domain(format!("rho0 = {rho0} must be positive")));
    }
    let var_t0 = source.covariance(t0, t0)?;
    if !(var_t0 > 0.0) {
        return Err(Error::domain(format!("Var X1(t0) = {var_t0} must be positive")));
    }
    let mut dec = Decomposition {
        source: source.clone(),
        t0: t0.to_vec(),
        rho0,
        initial_rho0: rho0,
        halvings: 0,
        var_t0,
        alpha_min: f64::NAN,
        alpha_max: f64::NAN,
        alpha_holder_exponent: None,
    };
    loop {
        let excludes_origin = t0.iter().any(|c| c.abs() > 0.5 * dec.rho0);
        if excludes_origin {
            let alphas = dec.grid(ALPHA_GRID_POINTS).iter().map(|t| dec.alpha(t)).collect::<Result<Vec<f64>>>()?;
            let lo = alphas.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo >= 0.5 && hi <= 1.5 {
                dec.alpha_min = lo;
                dec.alpha_max = hi;
                dec.alpha_holder_exponent = holder_fit(&dec)?;
                return Ok(dec);
            }
        }
        if dec.halvings == MAX_HALVINGS {
            return Err(Error::numerical(format!(
                "alpha bound unattainable: 1/2 <= alpha <= 3/2 fails after {MAX_HALVINGS} halvings of rho0"
            )));
        }
        dec.rho0 *= 0.5;
        dec.halvings += 1;
    }
}

fn holder_fit(dec: &Decomposition) -> Result<Option<f64>> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for t in dec.grid(ALPHA_GRID_POINTS) {
        let dist = t.iter().zip(&dec.t0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let diff = (dec.alpha(&t)? - 1.0).abs();
        if dist > 0.0 && diff > 1e-13 {
            xs.push(dist.ln());
            ys.push(diff.ln());
        }
    }
    Ok((xs.len() >= 3).then(|| linear_fit(&xs, &ys).slope))
}

/// `α` on a lattice plus the site of `t₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitPlan {
    pub t0_site: usize,
    pub alpha: Vec<f64>,
}

fn check_plan(field: &FieldSample, plan: &SplitPlan) -> Result<()> {
    if plan.alpha.len() != field.lattice.len() {
        return Err(Error::domain("split plan was built for a different lattice"));
    }
    Ok(())
}

/// `(X⁽¹⁾, X⁽²⁾)` with `X⁽²⁾(t) = α(t) X(t₀)` per component and `X⁽¹⁾ = X − X⁽²⁾`.
pub fn split_with_plan(field: &FieldSample, plan: &SplitPlan) -> Result<(FieldSample, FieldSample)> {
    check_plan(field, plan)?;
    let d = field.components;
    let anchor = field.site_values(plan.t0_site).to_vec();
    let mut x1 = Vec::with_capacity(field.values.len());
    let mut x2 = Vec::with_capacity(field.values.len());
    for (s, &a) in plan.alpha.iter().enumerate() {
        for c in 0..d {
            let v2 = a * anchor[c];
            x2.push(v2);
            x1.push(field.value(s, c) - v2);
        }
    }
    let make = |v| FieldSample::new(field.params, field.lattice.clone(), d, v, field.seed, field.band);
    Ok((make(x1)?, make(x2)?))
}

pub fn split_field(field: &FieldSample, dec: &Decomposition) -> Result<(FieldSample, FieldSample)> {
    split_with_plan(field, &dec.plan(&field.lattice)?)
}

/// `X⁽³⁾(t) = (z − X⁽¹⁾(t)) / α(t)`, so that `X(t) = z` iff `X⁽³⁾(t) = X(t₀)`.
pub fn x3_field(field: &FieldSample, plan: &SplitPlan, z: &[f64]) -> Result<FieldSample> {
    check_plan(field, plan)?;
    if z.len() != field.components {
        return Err(Error::domain("target z must live in the field's value space"));
    }
    if plan.alpha.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::domain("X3 needs alpha > 0 at every site; restrict the lattice to I"));
    }
    let (x1, _) = split_with_plan(field, plan)?;
    let d = field.components;
    let values = (0..field.lattice.len())
        .flat_map(|s| {
            let a = plan.alpha[s];
            let x1 = &x1;
            (0..d).map(move |c| (z[c] - x1.value(s, c)) / a)
        })
        .collect();
    FieldSample::new(field.params, field.lattice.clone(), d, values, field.seed, field.band)
}

/// `max_t | |X(t) − z| − α(t)|X⁽³⁾(t) − X(t₀)| |`.
pub fn x3_identity_residual(field: &FieldSample, x3: &FieldSample, plan: &SplitPlan, z: &[f64]) -> f64 {
    let anchor = field.site_values(plan.t0_site);
    let norm = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    (0..field.lattice.len())
        .map(|s| (norm(field.site_values(s), z) - plan.alpha[s] * norm(x3.site_values(s), anchor)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceProbe {
    pub site: usize,
    pub t: Vec<f64>,
    /// Sample correlation of `X⁽¹⁾_1(t)` with `X_1(t₀)`.
    pub correlation: f64,
    /// Sample variance of `X⁽¹⁾_1(t)`.
    pub x1_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub replications: usize,
    pub bound: f64,
    pub probes: Vec<IndependenceProbe>,
    pub pass: bool,
}

/// Correlation of `X⁽¹⁾(t)` with `X(t₀)` across replications at the probe
/// sites, each required to lie within `±3 R^{−1/2}`.
pub fn independence_study(
    dec: &Decomposition,
    lattice: &Lattice,
    probes: &[usize],
    replications: usize,
    seed: u64,
) -> Result<IndependenceReport> {
    if replications < 3 {
        return Err(Error::domain("independence study needs at least 3 replications"));
    }
    let plan = dec.plan(lattice)?;
    let prepared = dec.source.prepare(lattice)?;
    let rows = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let f = prepared.sample(split_seed(seed, r))?;
            let (x1, _) = split_with_plan(&f, &plan)?;
            Ok((f.value(plan.t0_site, 0), probes.iter().map(|&s| x1.value(s, 0)).collect::<Vec<f64>>()))
        })
        .collect::<Result<Vec<(f64, Vec<f64>)>>>()?;
    let anchor: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let bound = 3.0 / (replications as f64).sqrt();
    let probes: Vec<IndependenceProbe> = probes
        .iter()
        .enumerate()
        .map(|(i, &site)| {
            let xs: Vec<f64> = rows.iter().map(|r| r.1[i]).collect();
            IndependenceProbe { site, t: lattice.point(site), correlation: stats::correlation(&xs, &anchor), x1_variance: stats::variance(&xs) }
        })
        .collect();
    let pass = probes.iter().all(|p| p.correlation.abs() <= bound);
    Ok(IndependenceReport { replications, bound, probes, pass })
}

/// Box-counting proxy for the Lebesgue measure of the range: `ρ^d` times the
/// number of grid boxes of side `ρ` hit by the sample values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxCount {
    pub rho: f64,
    pub boxes: usize,
    pub volume: f64,
}

pub fn box_count(field: &FieldSample, rho: f64) -> Result<BoxCount> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain(format!("box side {rho} must be positive")));
    }
    let boxes: HashSet<Vec<i64>> = (0..field.lattice.len())
        .map(|s| field.site_values(s).iter().map(|x| (x / rho).floor() as i64).collect())
        .collect();
    Ok(BoxCount { rho, boxes: boxes.len(), volume: rho.powi(field.components as i32) * boxes.len() as f64 })
}
