use crate::error::{Error, Result};
use serde::Serialize;

/// Default cap on the number of lattice sites.
pub const DEFAULT_SITE_BUDGET: usize = 1 << 24;

/// Regular grid with common spacing `h` on a box in `R^N`. Sites are stored
/// row-major with the last axis varying fastest.
///
/// When every axis start is an integer multiple of `h`, coordinates are
/// computed as `k·h` for integers `k`, so the origin (if present) is exactly 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lattice {
    spacing: f64,
    lo: Vec<f64>,
    counts: Vec<usize>,
    /// Integer index of the first site on each axis, when aligned with `h·Z`.
    aligned_start: Option<Vec<i64>>,
}

fn near_integer(x: f64) -> Option<i64> {
    let r = x.round();
    ((x - r).abs() <= 1e-9 * x.abs().max(1.0)).then_some(r as i64)
}

impl Lattice {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, spacing: f64) -> Result<Self> {
        Self::with_budget(lo, hi, spacing, DEFAULT_SITE_BUDGET)
    }

    pub fn with_budget(lo: Vec<f64>, hi: Vec<f64>, spacing: f64, budget: usize) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::domain("lattice bounds must be non-empty and of equal dimension"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::domain(format!("lattice spacing {spacing} must be positive")));
        }
        let mut counts = Vec::with_capacity(lo.len());
        let mut starts = Vec::with_capacity(lo.len());
        let mut total: usize = 1;
        for (axis, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && b >= a) {
                return Err(Error::domain(format!("axis {axis}: bounds [{a}, {b}] are invalid")));
            }
            let steps = near_integer((b - a) / spacing).ok_or_else(|| {
                Error::domain(format!("axis {axis}: spacing {spacing} does not divide length {}", b - a))
            })?;
            let count = steps as usize + 1;
            total = total
                .checked_mul(count)
                .filter(|&t| t <= budget)
                .ok_or_else(|| Error::Budget(format!("lattice needs more than {budget} sites")))?;
            counts.push(count);
            starts.push(near_integer(a / spacing));
        }
        let aligned_start = starts.into_iter().collect::<Option<Vec<i64>>>();
        Ok(Lattice { spacing, lo, counts, aligned_start })
    }

    /// `[lo, hi]^N`.
    pub fn cube(dim: usize, lo: f64, hi: f64, spacing: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], spacing)
    }

    /// `[−m h, m h]^N` with `m = radius / h` rounded up.
    pub fn centered(dim: usize, radius: f64, spacing: f64) -> Result<Self> {
        let m = (radius / spacing - 1e-9).ceil().max(0.0);
        let r = m * spacing;
        Self::cube(dim, -r, r, spacing)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.axis_coord(axis, 0)
    }
    pub fn hi(&self, axis: usize) -> f64 {
        self.axis_coord(axis, self.counts[axis] - 1)
    }

    /// Largest axis length (at least one spacing).
    pub fn extent(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.hi(a) - self.lo(a))
            .fold(self.spacing, f64::max)
    }

    pub fn aligned_start(&self) -> Option<&[i64]> {
        self.aligned_start.as_deref()
    }

    /// Coordinate of index `i` along `axis`.
    #[inline]
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        match &self.aligned_start {
            Some(s) => (s[axis] + i as i64) as f64 * self.spacing,
            None => self.lo[axis] + i as f64 * self.spacing,
        }
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.counts[axis]).map(|i| self.axis_coord(axis, i)).collect()
    }

    /// Index of the site whose coordinate on `axis` is exactly zero.
    pub fn axis_origin_index(&self, axis: usize) -> Option<usize> {
        let s = self.aligned_start.as_ref()?[axis];
        (s <= 0 && ((-s) as usize) < self.counts[axis]).then_some((-s) as usize)
    }

    pub fn origin_index(&self) -> Option<usize> {
        let multi = (0..self.dim()).map(|a| self.axis_origin_index(a)).collect::<Option<Vec<_>>>()?;
        Some(self.site_index(&multi))
    }

    pub fn origin_included(&self) -> bool {
        self.origin_index().is_some()
    }

    pub fn site_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.counts).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi_index(&self, mut site: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            out[axis] = site % self.counts[axis];
            site /= self.counts[axis];
        }
        out
    }

    pub fn point(&self, site: usize) -> Vec<f64> {
        self.multi_index(site)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.axis_coord(axis, i))
            .collect()
    }

    /// Euclidean norm of the site position.
    pub fn norm(&self, site: usize) -> f64 {
        self.point(site).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Whether the box `[−r, r]^N` lies inside the lattice bounds.
    pub fn covers_ball(&self, radius: f64) -> bool {
        let slack = 1e-9 * self.spacing;
        (0..self.dim()).all(|a| self.lo(a) <= -radius + slack && self.hi(a) >= radius - slack)
    }
}
