use crate::error::{Error, Result};
use serde::Serialize;

/// Closed Euclidean ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Smallest double `r` with `r·r ≥ d2`, so membership tests written as
/// `dist² ≤ r²` accept every point at squared distance `d2`.
pub(crate) fn covering_radius(d2: f64) -> f64 {
    let mut r = d2.sqrt();
    while r * r < d2 {
        r = f64::from_bits(r.to_bits() + 1);
    }
    r
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!("ball radius {radius} must be positive and finite")));
        }
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("ball center must be a non-empty finite vector"));
        }
        Ok(Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    #[inline]
    pub fn contains_point(&self, x: &[f64]) -> bool {
        dist2(&self.center, x) <= self.radius * self.radius
    }

    /// Closed balls meet iff `|c − c'| ≤ r + r'`.
    pub fn intersects(&self, other: &Ball) -> bool {
        let s = self.radius + other.radius;
        dist2(&self.center, &other.center) <= s * s
    }

    /// `B ⊂ B'` iff `|c − c'| + r ≤ r'`.
    pub fn inside(&self, other: &Ball) -> bool {
        dist2(&self.center, &other.center).sqrt() + self.radius <= other.radius
    }

    /// Same center, radius multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Ball {
        Ball { center: self.center.clone(), radius: self.radius * factor }
    }
}

/// Parameter-space region over which occupation is measured.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Region {
    /// Closed box `∏[lo_j, hi_j]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Closed ball.
    Ball(Ball),
}

impl Region {
    pub fn interval(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::domain("region bounds must satisfy lo < hi on every axis"));
        }
        Ok(Region::Box { lo, hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Box { lo, .. } => lo.len(),
            Region::Ball(b) => b.dim(),
        }
    }

    /// Bounding box `(lo, hi)`.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Region::Box { lo, hi } => (lo.clone(), hi.clone()),
            Region::Ball(b) => (
                b.center.iter().map(|c| c - b.radius).collect(),
                b.center.iter().map(|c| c + b.radius).collect(),
            ),
        }
    }

    /// Lebesgue measure.
    pub fn volume(&self) -> f64 {
        match self {
            Region::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            Region::Ball(b) => {
                let n = b.dim();
                crate::spectral_field::special::sphere_area(n) / n as f64 * b.radius.powi(n as i32)
            }
        }
    }

    /// Membership of a lattice point; box faces get a `slack` allowance.
    /// Ball regions use the same norm test as the sojourn statistic.
    pub(crate) fn contains(&self, t: &[f64], slack: f64) -> bool {
        match self {
            Region::Box { lo, hi } => t.iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| *x >= a - slack && *x <= b + slack),
            Region::Ball(b) => {
                let norm = t.iter().zip(&b.center).map(|(x, c)| (x - c) * (x - c)).sum::<f64>().sqrt();
                norm <= b.radius
            }
        }
    }
}

/// Result of the greedy 5r-selection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VitaliSelection {
    /// Input indices of the kept balls, in selection order.
    pub kept: Vec<usize>,
    /// For each input ball, the input index of a kept ball it meets whose
    /// radius is at least its own (itself when kept).
    pub witness: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VitaliCheck {
    pub pairwise_disjoint: bool,
    pub five_cover: bool,
    pub witness_radius_ok: bool,
}

impl VitaliCheck {
    pub fn ok(&self) -> bool {
        self.pairwise_disjoint && self.five_cover && self.witness_radius_ok
    }
}

/// Greedy selection in nonincreasing radius order (ties by input index):
/// a ball is kept iff it is disjoint from every ball kept so far.
pub fn vitali_select(balls: &[Ball]) -> VitaliSelection {
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| balls[b].radius.total_cmp(&balls[a].radius).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    let mut witness = vec![usize::MAX; balls.len()];
    for i in order {
        match kept.iter().find(|&&k| balls[k].intersects(&balls[i])) {
            Some(&k) => witness[i] = k,
            None => {
                witness[i] = i;
                kept.push(i);
            }
        }
    }
    VitaliSelection { kept, witness }
}

impl VitaliSelection {
    pub fn kept_balls(&self, balls: &[Ball]) -> Vec<Ball> {
        self.kept.iter().map(|&k| balls[k].clone()).collect()
    }

    /// Exhaustive verification: all kept pairs disjoint, and every input ball
    /// contained in `5B` for some kept `B`.
    pub fn verify(&self, balls: &[Ball]) -> VitaliCheck {
        let pairwise_disjoint = self
            .kept
            .iter()
            .enumerate()
            .all(|(i, &a)| self.kept[i + 1..].iter().all(|&b| !balls[a].intersects(&balls[b])));
        let five_cover = balls.iter().enumerate().all(|(i, ball)| {
            let w = self.witness[i];
            (w < balls.len() && ball.inside(&balls[w].scaled(5.0)))
                || self.kept.iter().any(|&k| ball.inside(&balls[k].scaled(5.0)))
        });
        let witness_radius_ok = balls.iter().enumerate().all(|(i, ball)| {
            let w = self.witness[i];
            w < balls.len() && self.kept.contains(&w) && balls[w].radius >= ball.radius && balls[w].intersects(ball)
        });
        VitaliCheck { pairwise_disjoint, five_cover, witness_radius_ok }
    }
}
