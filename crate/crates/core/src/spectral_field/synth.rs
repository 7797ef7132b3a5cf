//! Direct spectral summation on a geometric radial grid.
//!
//! Each cell `C` of the half-space carries a complex Gaussian weight of
//! variance `m(C) = ∫_C h`; its mirror `−C` carries the conjugate, so a cell
//! contributes `√(2m) [U (cos ξ·t − 1) − V sin ξ·t]` to a real component.
//! Frequencies below the grid act on the lattice as a Gaussian linear drift
//! with matched second moment.

use super::lattice::Lattice;
use super::model::SpectralModel;
use super::sample::{Band, FieldSample};
use super::special::sphere_area;
use crate::error::{Error, Result};
use crate::rng::{self, purpose};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SynthesisConfig {
    pub cells_per_octave: usize,
    /// Octaves below `2π/extent` covered by explicit cells.
    pub low_octaves: f64,
    /// Allowed share of `V(h)` carried by frequencies above the grid.
    pub tail_fraction: f64,
    /// Hard cap on octaves added above `π/h` to reach `tail_fraction`.
    pub max_high_octaves: usize,
    /// Directions per radial shell (ignored for `N = 1`).
    pub directions_2d: usize,
    pub directions_3d: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            cells_per_octave: 64,
            low_octaves: 12.0,
            tail_fraction: 0.005,
            max_high_octaves: 48,
            directions_2d: 8,
            directions_3d: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralCell {
    pub lo: f64,
    pub hi: f64,
    /// Root-mean-square radial frequency of the shell.
    pub radius: f64,
    /// Spectral mass `m(C)`.
    pub mass: f64,
    pub direction: [f64; 3],
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralGrid {
    pub cells: Vec<SpectralCell>,
    pub xi_lo: f64,
    pub xi_hi: f64,
    /// Per-axis standard deviation of the low-frequency drift slope.
    pub drift_sd: f64,
    /// Share of `V(h)` above `xi_hi` actually achieved.
    pub tail_fraction: f64,
}

const GOLDEN_FRACTION: f64 = 0.618_033_988_749_894_9;

impl SpectralGrid {
    /// Grid adapted to `lattice`, with each entry of `breakpoints` made a cell edge.
    pub fn new(model: &SpectralModel, lattice: &Lattice, breakpoints: &[f64], cfg: &SynthesisConfig) -> Result<Self> {
        let n_dim = model.params().n();
        if lattice.dim() != n_dim {
            return Err(Error::domain(format!(
                "lattice dimension {} differs from field dimension {n_dim}",
                lattice.dim()
            )));
        }
        let h = lattice.spacing();
        let extent = lattice.extent();
        let mut xi_lo = 2.0 * PI / extent * 2f64.powf(-cfg.low_octaves);
        for &b in breakpoints {
            if b > 0.0 && b.is_finite() && b <= xi_lo {
                xi_lo = b * 0.5;
            }
        }

        // raise the top of the grid until the neglected tail is small at lag h
        let v_h = model.variogram(h)?;
        let mut xi_hi = PI / h;
        let mut tail = model.high_frequency_variance(xi_hi)? / v_h;
        let mut added = 0;
        while tail > cfg.tail_fraction && added < cfg.max_high_octaves {
            xi_hi *= 2.0;
            added += 1;
            tail = model.high_frequency_variance(xi_hi)? / v_h;
        }
        for &b in breakpoints {
            if b.is_finite() && b > xi_hi {
                xi_hi = b;
                tail = model.high_frequency_variance(xi_hi)? / v_h;
            }
        }

        let octaves = (xi_hi / xi_lo).log2();
        let steps = (octaves * cfg.cells_per_octave as f64).ceil() as usize;
        let ratio = (xi_hi / xi_lo).powf(1.0 / steps as f64);
        let mut edges: Vec<f64> = (0..=steps).map(|i| xi_lo * ratio.powi(i as i32)).collect();
        edges[steps] = xi_hi;
        for &b in breakpoints {
            if b > xi_lo && b < xi_hi {
                edges.push(b);
            }
        }
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs());

        let directions = match n_dim {
            1 => 1,
            2 => cfg.directions_2d.max(2),
            _ => cfg.directions_3d.max(4),
        };
        let solid_angle = sphere_area(n_dim) / 2.0 / directions as f64;
        let mut cells = Vec::with_capacity((edges.len() - 1) * directions);
        for (shell, w) in edges.windows(2).enumerate() {
            let (lo, hi) = (w[0], w[1]);
            let mass = model.radial_mass(lo, hi)?;
            let second = model.radial_second_moment(lo, hi)?;
            let radius = (second / mass).sqrt();
            let offset = (shell as f64 * GOLDEN_FRACTION).fract();
            for k in 0..directions {
                let direction = match n_dim {
                    1 => [1.0, 0.0, 0.0],
                    2 => {
                        let theta = (k as f64 + offset) * PI / directions as f64;
                        [theta.cos(), theta.sin(), 0.0]
                    }
                    _ => {
                        // equal-area points on the upper hemisphere
                        let z = (k as f64 + 0.5) / directions as f64;
                        let phi = 2.0 * PI * ((k as f64 * GOLDEN_FRACTION) + offset).fract();
                        let rho = (1.0 - z * z).sqrt();
                        [rho * phi.cos(), rho * phi.sin(), z]
                    }
                };
                cells.push(SpectralCell { lo, hi, radius, mass: mass * solid_angle, direction });
            }
        }

        let drift_var = sphere_area(n_dim) / n_dim as f64 * model.low_second_moment(xi_lo)?;
        Ok(SpectralGrid { cells, xi_lo, xi_hi, drift_sd: drift_var.sqrt(), tail_fraction: tail })
    }

    /// Variogram at `lag` (along the first axis) reproduced by the cells in `band`.
    pub fn variogram(&self, lag: f64, band: Band) -> f64 {
        let mut v: f64 = self
            .cells
            .iter()
            .filter(|c| band.contains_cell(c.lo, c.hi))
            .map(|c| 2.0 * c.mass * (2.0 - 2.0 * (lag * c.radius * c.direction[0]).cos()))
            .sum();
        if band.lo() == 0.0 {
            v += self.drift_sd * self.drift_sd * lag * lag;
        }
        v
    }
}

/// Per-axis phase data for one cell: anchors `e^{iξ x}` at block starts and a
/// shared table `e^{iξ j h}` within blocks.
struct AxisPhases {
    re: Vec<f64>,
    im: Vec<f64>,
}

const BLOCK: usize = 64;

/// Block start indices along an axis, aligned so the origin (if present)
/// starts a block and therefore has an exact phase of 1.
fn block_starts(count: usize, origin: Option<usize>) -> Vec<usize> {
    let first = origin.map(|o| o % BLOCK).unwrap_or(0);
    let mut starts = Vec::new();
    if first > 0 {
        starts.push(0);
    }
    let mut s = first;
    while s < count {
        starts.push(s);
        s += BLOCK;
    }
    starts
}

struct Geometry {
    coords: Vec<Vec<f64>>,
    counts: Vec<usize>,
    blocks: Vec<usize>,
    spacing: f64,
}

impl Geometry {
    fn new(lattice: &Lattice) -> Self {
        let dim = lattice.dim();
        let last = dim - 1;
        Geometry {
            coords: (0..dim).map(|a| lattice.axis_coords(a)).collect(),
            counts: lattice.counts().to_vec(),
            blocks: block_starts(lattice.counts()[last], lattice.axis_origin_index(last)),
            spacing: lattice.spacing(),
        }
    }

    /// Exact phases along a leading axis.
    fn axis_phases(&self, axis: usize, xi: f64) -> AxisPhases {
        let (im, re): (Vec<f64>, Vec<f64>) = self.coords[axis].iter().map(|&x| (xi * x).sin_cos()).unzip();
        AxisPhases { re, im }
    }
}

/// Add one cell's contribution to a single component buffer.
fn accumulate_cell(out: &mut [f64], geo: &Geometry, xi: &[f64], p: f64, q: f64, w_re: &mut [f64], w_im: &mut [f64]) {
    let dim = geo.counts.len();
    let last = dim - 1;
    let n_last = geo.counts[last];
    let xl = xi[last];

    // within-block rotation table by recurrence from an exact step
    let (s1, c1) = (xl * geo.spacing).sin_cos();
    w_re[0] = 1.0;
    w_im[0] = 0.0;
    for j in 1..BLOCK {
        w_re[j] = w_re[j - 1] * c1 - w_im[j - 1] * s1;
        w_im[j] = w_im[j - 1] * c1 + w_re[j - 1] * s1;
    }
    let anchors: Vec<(f64, f64)> = geo.blocks.iter().map(|&b| (xl * geo.coords[last][b]).sin_cos()).collect();
    let leading: Vec<AxisPhases> = (0..last).map(|a| geo.axis_phases(a, xi[a])).collect();

    let rows: usize = geo.counts[..last].iter().product();
    let mut multi = vec![0usize; last];
    for row in 0..rows {
        // prefix phase over leading axes
        let (mut zr, mut zi) = (1.0, 0.0);
        for (a, ph) in leading.iter().enumerate() {
            let (r, i) = (ph.re[multi[a]], ph.im[multi[a]]);
            (zr, zi) = (zr * r - zi * i, zr * i + zi * r);
        }
        let base = row * n_last;
        for (bi, &start) in geo.blocks.iter().enumerate() {
            let end = geo.blocks.get(bi + 1).copied().unwrap_or(n_last);
            let (sa, ca) = anchors[bi];
            let (ar, ai) = (zr * ca - zi * sa, zr * sa + zi * ca);
            // p·Re(z) − q·Im(z) with z = anchor·w_j
            let alpha = p * ar - q * ai;
            let beta = p * ai + q * ar;
            let seg = &mut out[base + start..base + end];
            for (j, x) in seg.iter_mut().enumerate() {
                *x += alpha * w_re[j] - beta * w_im[j] - p;
            }
        }
        for a in (0..last).rev() {
            multi[a] += 1;
            if multi[a] < geo.counts[a] {
                break;
            }
            multi[a] = 0;
        }
    }
}

/// Synthesize with a prepared grid. Cells outside `band` are skipped but keep
/// their random streams, so sub-band fields built from one grid and seed add up
/// to the full-band field.
pub fn synthesize_with_grid(
    lattice: &Lattice,
    model: &SpectralModel,
    grid: &SpectralGrid,
    seed: u64,
    band: Option<Band>,
) -> Result<FieldSample> {
    let params = *model.params();
    let d = params.d();
    let n_sites = lattice.len();
    let geo = Geometry::new(lattice);
    let use_band = band.unwrap_or_else(Band::full);
    let mut w_re = vec![0.0; BLOCK];
    let mut w_im = vec![0.0; BLOCK];
    let mut values = vec![0.0; n_sites * d];
    let mut buf = vec![0.0; n_sites];
    let mut xi = vec![0.0; lattice.dim()];
    for comp in 0..d {
        buf.iter_mut().for_each(|x| *x = 0.0);
        for (index, cell) in grid.cells.iter().enumerate() {
            if !use_band.contains_cell(cell.lo, cell.hi) {
                continue;
            }
            let mut rng = rng::stream(seed, &[purpose::SPECTRAL_CELL, index as u64, comp as u64]);
            let u: f64 = rng.sample(StandardNormal);
            let v: f64 = rng.sample(StandardNormal);
            let amp = (2.0 * cell.mass).sqrt();
            for (a, x) in xi.iter_mut().enumerate() {
                *x = cell.radius * cell.direction[a];
            }
            accumulate_cell(&mut buf, &geo, &xi, amp * u, amp * v, &mut w_re, &mut w_im);
        }
        if use_band.lo() == 0.0 && grid.drift_sd > 0.0 {
            for axis in 0..lattice.dim() {
                let mut rng = rng::stream(seed, &[purpose::SPECTRAL_DRIFT, axis as u64, comp as u64]);
                let g: f64 = rng.sample::<f64, _>(StandardNormal) * grid.drift_sd;
                for (site, x) in buf.iter_mut().enumerate() {
                    let mut rem = site;
                    let mut idx = 0;
                    for a in (0..lattice.dim()).rev() {
                        if a == axis {
                            idx = rem % geo.counts[a];
                        }
                        rem /= geo.counts[a];
                    }
                    *x += g * geo.coords[axis][idx];
                }
            }
        }
        for (site, x) in buf.iter().enumerate() {
            values[site * d + comp] = *x;
        }
    }
    FieldSample::new(params, lattice.clone(), d, values, seed, band)
}

/// One-shot synthesis; the band edges become grid breakpoints.
pub fn synthesize(lattice: &Lattice, model: &SpectralModel, seed: u64, band: Option<Band>) -> Result<FieldSample> {
    let breaks: Vec<f64> = band.map(|b| vec![b.lo(), b.hi()]).unwrap_or_default();
    let grid = SpectralGrid::new(model, lattice, &breaks, &SynthesisConfig::default())?;
    synthesize_with_grid(lattice, model, &grid, seed, band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::variance_model::{FieldParams, Hurst};

    fn bm_model(d: usize) -> SpectralModel {
        let p = FieldParams::new(1, d, Hurst::rational(1, 2).unwrap(), 0.0, 0.5).unwrap();
        SpectralModel::calibrated(p, 1.0 / 64.0).unwrap()
    }

    #[test]
    fn origin_is_exactly_zero() {
        let m = bm_model(2);
        let l = Lattice::new(vec![-0.5], vec![0.5], 1.0 / 256.0).unwrap();
        let s = synthesize(&l, &m, 5, None).unwrap();
        let o = l.origin_index().unwrap();
        assert_eq!(s.site_values(o), &[0.0, 0.0]);
        let b = synthesize(&l, &m, 5, Some(Band::new(4.0, 400.0).unwrap())).unwrap();
        assert_eq!(b.site_values(o), &[0.0, 0.0]);
    }

    #[test]
    fn grid_reproduces_model_variogram() {
        let m = bm_model(1);
        let l = Lattice::new(vec![0.0], vec![1.0], 1.0 / 1024.0).unwrap();
        let g = SpectralGrid::new(&m, &l, &[], &SynthesisConfig::default()).unwrap();
        for k in 0..=10 {
            let lag = 2f64.powi(-k);
            let want = m.variogram(lag).unwrap();
            let got = g.variogram(lag, Band::full());
            assert!((got / want - 1.0).abs() < 0.02, "lag {lag}: {got} vs {want}");
        }
    }

    #[test]
    fn sub_bands_add_up() {
        let m = bm_model(1);
        let l = Lattice::new(vec![-0.25], vec![0.25], 1.0 / 128.0).unwrap();
        let (a, b) = (16.0, 512.0);
        let grid = SpectralGrid::new(&m, &l, &[a, b], &SynthesisConfig::default()).unwrap();
        let low = synthesize_with_grid(&l, &m, &grid, 3, Some(Band::new(0.0, a).unwrap())).unwrap();
        let mid = synthesize_with_grid(&l, &m, &grid, 3, Some(Band::new(a, b).unwrap())).unwrap();
        let both = synthesize_with_grid(&l, &m, &grid, 3, Some(Band::new(0.0, b).unwrap())).unwrap();
        for i in 0..l.len() {
            let s = low.values[i] + mid.values[i];
            assert!((s - both.values[i]).abs() <= 1e-12 * (1.0 + both.values[i].abs()));
        }
    }

    #[test]
    fn two_dimensional_synthesis_runs() {
        let p = FieldParams::new(2, 1, Hurst::float(0.5).unwrap(), 0.0, 0.5).unwrap();
        let m = SpectralModel::calibrated(p, 1.0 / 64.0).unwrap();
        let l = Lattice::cube(2, -0.25, 0.25, 1.0 / 32.0).unwrap();
        let s = synthesize(&l, &m, 1, None).unwrap();
        assert_eq!(s.value(l.origin_index().unwrap(), 0), 0.0);
        let g = SpectralGrid::new(&m, &l, &[], &SynthesisConfig::default()).unwrap();
        let v = g.variogram(0.125, Band::full());
        let w = m.variogram(0.125).unwrap();
        assert!((v / w - 1.0).abs() < 0.03, "{v} vs {w}");
    }

    #[test]
    fn synthesis_is_deterministic() {
        let m = bm_model(1);
        let l = Lattice::new(vec![0.0], vec![1.0], 1.0 / 64.0).unwrap();
        let a = synthesize(&l, &m, 11, None).unwrap();
        let b = synthesize(&l, &m, 11, None).unwrap();
        assert_eq!(a.values, b.values);
        let c = synthesize(&l, &m, 12, None).unwrap();
        assert_ne!(a.values, c.values);
    }
}
