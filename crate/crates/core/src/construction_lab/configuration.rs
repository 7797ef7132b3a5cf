use super::ladder::{verify_p1_to_p4, EpsilonLadder};
use crate::error::{Error, Result};
use crate::variance_model::FieldParams;
use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::f64::consts::LN_2;

/// Largest `log(ε_0/ε_p)` sampled with true radii. Beyond it the smallest
/// shells drop under the float resolution of the coordinates.
pub const MAX_DIRECT_RANGE: f64 = 20.0;
/// Absolute verification slack, relative to `ε_0`.
const COORD_TOL: f64 = 1e-12;
const MAX_REJECTIONS: usize = 10_000;

/// Bijections `a_k: {2^k+1..2^{k+1}} → {1..2^k}` for `k = 0..p`, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BranchAssignment {
    p: u32,
    maps: Vec<Vec<usize>>,
}

impl BranchAssignment {
    pub fn identity(p: u32) -> Self {
        let maps = (0..p).map(|k| (1..=1usize << k).collect()).collect();
        BranchAssignment { p, maps }
    }

    pub fn random<R: Rng + ?Sized>(p: u32, rng: &mut R) -> Self {
        let mut out = Self::identity(p);
        for m in &mut out.maps {
            m.shuffle(rng);
        }
        out
    }

    /// `maps[k][j]` is the parent of point `2^k + 1 + j`.
    pub fn from_maps(maps: Vec<Vec<usize>>) -> Result<Self> {
        for (k, m) in maps.iter().enumerate() {
            let size = 1usize << k;
            if m.len() != size || !is_bijection(m) {
                return Err(Error::domain(format!("a_{k} is not a bijection onto 1..={size}")));
            }
        }
        Ok(BranchAssignment { p: maps.len() as u32, maps })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Parent `a_k(i)` of the 1-based point index `i ≥ 2`, with its level `k`.
    pub fn parent(&self, i: usize) -> (usize, usize) {
        let k = (usize::BITS - 1 - (i - 1).leading_zeros()) as usize;
        (k, self.maps[k][i - (1 << k) - 1])
    }

    /// `#A_k = (2^k)!`.
    pub fn count(k: u32) -> BigUint {
        (1..=1u64 << k).fold(BigUint::from(1u32), |acc, j| acc * j)
    }
}

fn is_bijection(m: &[usize]) -> bool {
    let mut seen = vec![false; m.len()];
    m.iter().all(|&v| v >= 1 && v <= m.len() && !std::mem::replace(&mut seen[v - 1], true))
}

/// Counts bijections among all `m^m` self-maps of `{1..m}`, `m = 2^k`, by
/// brute force.
pub fn enumerate_bijections(k: u32) -> Result<u64> {
    if k > 3 {
        return Err(Error::domain(format!("enumeration limited to k <= 3, got {k}")));
    }
    let m = 1usize << k;
    let mut digits = vec![1usize; m];
    let mut count = 0u64;
    loop {
        if is_bijection(&digits) {
            count += 1;
        }
        let mut pos = 0;
        loop {
            if pos == m {
                return Ok(count);
            }
            if digits[pos] < m {
                digits[pos] += 1;
                break;
            }
            digits[pos] = 1;
            pos += 1;
        }
    }
}

/// Outcome of the post-hoc checks on a sampled configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigurationChecks {
    pub shells: bool,
    pub distance_window: bool,
    pub separation: bool,
    pub disjoint_shells: bool,
    pub containment: bool,
    /// Smallest slack of `σ(|t_1|) ≥ 2^{−p}ε` and `σ(d(t_i,F_k)) ≥ 2^{k−p}ε`
    /// in log units; `None` for surrogate configurations.
    pub cond_margin: Option<f64>,
}

impl ConfigurationChecks {
    pub fn geometry_ok(&self) -> bool {
        self.shells && self.distance_window && self.separation && self.disjoint_shells && self.containment
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointConfiguration {
    pub dim: usize,
    /// `t_1, …, t_n` in sampling order.
    pub points: Vec<Vec<f64>>,
    /// Radii `ε_0, …, ε_p` actually used (normalized when `surrogate`).
    pub radii: Vec<f64>,
    pub surrogate: bool,
    pub branch: BranchAssignment,
    /// Post-hoc checks; `None` for hand-placed configurations.
    pub checks: Option<ConfigurationChecks>,
}

impl PointConfiguration {
    /// Hand-placed points `t_1..t_n` (`n = 2^p`) with the given parent maps.
    /// Only the σ-window conditions are checked, by the product bound itself.
    pub fn from_points(points: Vec<Vec<f64>>, branch: BranchAssignment) -> Result<Self> {
        let n = points.len();
        if n != 1usize << branch.p() {
            return Err(Error::domain(format!("need 2^p = {} points, got {n}", 1usize << branch.p())));
        }
        let dim = points[0].len();
        if points.iter().any(|t| t.len() != dim || t.iter().any(|x| !x.is_finite())) {
            return Err(Error::domain("points must share one dimension and be finite"));
        }
        Ok(PointConfiguration { dim, points, radii: Vec::new(), surrogate: false, branch, checks: None })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// `d(t_i, F_k)` for 1-based `i` in `(2^k, 2^{k+1}]`.
    pub fn distance_to_previous(&self, i: usize) -> f64 {
        let (k, _) = self.branch.parent(i);
        (0..1usize << k).map(|j| dist(&self.points[i - 1], &self.points[j])).fold(f64::INFINITY, f64::min)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Uniform point in `{r1 ≤ |x| ≤ r2}` around `center`.
fn sample_shell<R: Rng + ?Sized>(center: &[f64], r1: f64, r2: f64, rng: &mut R) -> Vec<f64> {
    let dim = center.len();
    let mut x = vec![0.0; dim];
    for _ in 0..MAX_REJECTIONS {
        for v in x.iter_mut() {
            *v = rng.random_range(-r2..=r2);
        }
        let r = norm(&x);
        if r >= r1 && r <= r2 {
            return center.iter().zip(&x).map(|(c, v)| c + v).collect();
        }
    }
    // Radial-angular fallback: radius by inverse CDF of r^{dim−1}, direction Gaussian.
    let u: f64 = rng.random();
    let n = dim as i32;
    let r = (r1.powi(n) + u * (r2.powi(n) - r1.powi(n))).powf(1.0 / dim as f64);
    loop {
        for v in x.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let len = norm(&x);
        if len > 0.0 {
            return center.iter().zip(&x).map(|(c, v)| c + r * v / len).collect();
        }
    }
}

/// Radii for sampling: the ladder's own when its dynamic range fits the
/// float grid, otherwise `ε'_0 = 1` with each log-gap capped so that the
/// total range stays within [`MAX_DIRECT_RANGE`] (caps never go below `log 8`).
fn sampling_radii(ladder: &EpsilonLadder) -> (Vec<f64>, bool) {
    let p = ladder.p() as usize;
    let range = ladder.lambda(p) - ladder.lambda(0);
    if let Some(r) = ladder.radii().filter(|_| range <= MAX_DIRECT_RANGE) {
        return (r, false);
    }
    let cap = (MAX_DIRECT_RANGE / p as f64).max(3.0 * LN_2);
    let mut radii = vec![1.0];
    for k in 0..p {
        let gap = ladder.log_gap(k).exp().min(cap);
        radii.push(radii[k] * (-gap).exp());
    }
    (radii, true)
}

/// Draws `t_1 ∈ H_0(0)` and `t_i ∈ H_k(t_{a_k(i)})`, then re-verifies every
/// geometric claim. Requires (P1).
pub fn sample_configuration<R: Rng + ?Sized>(
    ladder: &EpsilonLadder,
    branch: &BranchAssignment,
    params: &FieldParams,
    rng: &mut R,
) -> Result<PointConfiguration> {
    let p = ladder.p() as usize;
    if branch.p() as usize != p {
        return Err(Error::domain(format!("branch assignment has p = {}, ladder has p = {p}", branch.p())));
    }
    let verdicts = verify_p1_to_p4(ladder, params);
    if !verdicts.p1.holds {
        return Err(Error::domain("ladder violates eps_{k+1} <= eps_k/8; shells would overlap"));
    }
    let dim = params.n();
    let (radii, surrogate) = sampling_radii(ladder);
    let n = 1usize << p;
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n);
    points.push(sample_shell(&vec![0.0; dim], radii[1], radii[0] / 4.0, rng));
    for i in 2..=n {
        let (k, a) = branch.parent(i);
        let c = points[a - 1].clone();
        points.push(sample_shell(&c, radii[k + 1], radii[k] / 4.0, rng));
    }
    let mut config = PointConfiguration {
        dim,
        points,
        radii,
        surrogate,
        branch: branch.clone(),
        checks: None,
    };
    let checks = check_configuration(&config, ladder, params);
    if !checks.geometry_ok() {
        return Err(Error::numerical(format!("construction invariant violated: {checks:?}")));
    }
    if checks.cond_margin.is_some_and(|m| m < 0.0) && verdicts.p2.holds && verdicts.p3.holds {
        return Err(Error::numerical("sigma window violated although (P2)/(P3) hold"));
    }
    config.checks = Some(checks);
    Ok(config)
}

/// Recomputes the geometric invariants of a configuration from scratch.
pub fn check_configuration(c: &PointConfiguration, ladder: &EpsilonLadder, params: &FieldParams) -> ConfigurationChecks {
    let eps = &c.radii;
    let p = eps.len() - 1;
    let tol = COORD_TOL * eps[0];
    let in_window = |r: f64, k: usize| r >= eps[k + 1] - tol && r <= eps[k] / 4.0 + tol;

    let r1 = norm(&c.points[0]);
    let mut shells = in_window(r1, 0);
    let mut window = true;
    for i in 2..=c.n() {
        let (k, a) = c.branch.parent(i);
        shells &= in_window(dist(&c.points[i - 1], &c.points[a - 1]), k);
        window &= in_window(c.distance_to_previous(i), k);
    }

    let mut separation = true;
    let mut disjoint = true;
    for k in 0..=p {
        let m = (1usize << k).min(c.n());
        for l in 0..m {
            for j in 0..l {
                let r = dist(&c.points[l], &c.points[j]);
                separation &= r >= eps[k] - tol;
                disjoint &= r > 2.0 * eps[k] / 4.0;
            }
        }
    }
    let containment = c.points.iter().all(|t| norm(t) <= eps[0] + tol);

    let cond_margin = (!c.surrogate).then(|| {
        let lambda = ladder.lambda(0) / ladder.spec.beta;
        let slack = |r: f64, k: usize| {
            let log_sigma = params.h() * r.ln() + params.gamma() * (-r.ln()).ln();
            log_sigma - ((k as f64 - p as f64) * LN_2 - lambda)
        };
        let mut m = slack(r1, 0);
        for i in 2..=c.n() {
            let (k, _) = c.branch.parent(i);
            m = m.min(slack(c.distance_to_previous(i), k));
        }
        m
    });

    ConfigurationChecks { shells, distance_window: window, separation, disjoint_shells: disjoint, containment, cond_margin }
}
