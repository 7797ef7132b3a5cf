//! Exact fractional Brownian motion on one-dimensional lattices.
//!
//! Increments are fractional Gaussian noise drawn by circulant embedding
//! (one complex FFT yields two independent paths); `H = 1/2` uses i.i.d.
//! increments directly.

use super::lattice::Lattice;
use super::sample::FieldSample;
use crate::error::{Error, Result};
use crate::rng::{self, purpose};
use crate::variance_model::FieldParams;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Circulant-embedding sampler for `len` consecutive fGn increments of a
/// process with `E X(t)² = |t|^{2H}` on spacing `h`.
pub struct FgnGenerator {
    len: usize,
    hurst: f64,
    scale: f64,
    sqrt_eig: Vec<f64>,
    fft: Option<Arc<dyn Fft<f64>>>,
}

fn fgn_autocov(k: usize, hurst: f64) -> f64 {
    let k = k as f64;
    let two_h = 2.0 * hurst;
    0.5 * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
}

impl FgnGenerator {
    pub fn new(len: usize, hurst: f64, spacing: f64) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(Error::domain(format!("H = {hurst} must lie in (0, 1)")));
        }
        let scale = spacing.powf(hurst);
        if hurst == 0.5 || len <= 1 {
            return Ok(FgnGenerator { len, hurst, scale, sqrt_eig: Vec::new(), fft: None });
        }
        let m = len.next_power_of_two();
        let size = 2 * m;
        let mut row: Vec<Complex<f64>> = (0..size)
            .map(|j| {
                let k = if j <= m { j } else { size - j };
                Complex::new(fgn_autocov(k, hurst), 0.0)
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(size);
        fft.process(&mut row);
        let max = row.iter().map(|z| z.re).fold(0.0, f64::max);
        let min = row.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        if min < -1e-10 * max {
            return Err(Error::numerical(format!(
                "circulant embedding is not nonnegative definite (min eigenvalue {min:e})"
            )));
        }
        let sqrt_eig = row.iter().map(|z| (z.re.max(0.0) / size as f64).sqrt()).collect();
        Ok(FgnGenerator { len, hurst, scale, sqrt_eig, fft: Some(fft) })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Two independent increment sequences from one stream.
    pub fn sample_pair<R: Rng>(&self, rng: &mut R, a: &mut [f64], b: &mut [f64]) {
        debug_assert!(a.len() >= self.len && b.len() >= self.len);
        match &self.fft {
            None => {
                for x in a[..self.len].iter_mut().chain(b[..self.len].iter_mut()) {
                    *x = self.scale * rng.sample::<f64, _>(StandardNormal);
                }
            }
            Some(fft) => {
                let mut buf: Vec<Complex<f64>> = self
                    .sqrt_eig
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                for i in 0..self.len {
                    a[i] = self.scale * buf[i].re;
                    b[i] = self.scale * buf[i].im;
                }
            }
        }
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }
}

/// Prepared exact generator for a fixed lattice.
pub struct ExactFbm {
    params: FieldParams,
    lattice: Lattice,
    /// Lattice actually simulated (extended to the origin when needed).
    work: Lattice,
    /// Offset of `lattice` inside `work`.
    offset: usize,
    origin: Option<usize>,
    generator: FgnGenerator,
}

impl ExactFbm {
    pub fn new(lattice: &Lattice, params: &FieldParams) -> Result<Self> {
        if params.n() != 1 || lattice.dim() != 1 {
            return Err(Error::domain("exact fBm requires a one-dimensional domain"));
        }
        if params.gamma() != 0.0 {
            return Err(Error::domain("exact fBm requires gamma = 0"));
        }
        let h = params.h();
        let brownian = h == 0.5;
        if brownian && !lattice.origin_included() && lattice.lo(0) < 0.0 && lattice.hi(0) > 0.0 {
            return Err(Error::domain("a lattice straddling the origin must contain it"));
        }
        let (work, offset) = if lattice.origin_included() || brownian {
            (lattice.clone(), 0)
        } else {
            let start = lattice
                .aligned_start()
                .ok_or_else(|| Error::domain("exact fBm off the origin needs a lattice aligned with its spacing"))?[0];
            let sp = lattice.spacing();
            let end = start + lattice.counts()[0] as i64 - 1;
            let (lo, hi) = (start.min(0), end.max(0));
            (Lattice::new(vec![lo as f64 * sp], vec![hi as f64 * sp], sp)?, (start - lo) as usize)
        };
        let origin = work.axis_origin_index(0);
        let generator = FgnGenerator::new(work.len().saturating_sub(1), h, lattice.spacing())?;
        Ok(ExactFbm { params: *params, lattice: lattice.clone(), work, offset, origin, generator })
    }

    /// Fill `path` (length = work lattice) from `increments`, anchored at the origin
    /// or, for Brownian motion off the origin, at an independent Gaussian value.
    fn integrate<R: Rng>(&self, incr: &[f64], path: &mut [f64], rng: &mut R) {
        let n = path.len();
        match self.origin {
            Some(o) => {
                path[o] = 0.0;
                for i in o + 1..n {
                    path[i] = path[i - 1] + incr[i - 1];
                }
                for i in (0..o).rev() {
                    path[i] = path[i + 1] - incr[i];
                }
            }
            None => {
                // Brownian case only: X at the site nearest the origin is N(0, |t|)
                let first = self.work.lo(0);
                let anchor = if first > 0.0 { 0 } else { n - 1 };
                let t = self.work.axis_coord(0, anchor).abs();
                path[anchor] = t.sqrt() * rng.sample::<f64, _>(StandardNormal);
                for i in anchor + 1..n {
                    path[i] = path[i - 1] + incr[i - 1];
                }
                for i in (0..anchor).rev() {
                    path[i] = path[i + 1] - incr[i];
                }
            }
        }
    }

    pub fn sample(&self, seed: u64) -> Result<FieldSample> {
        let d = self.params.d();
        let n_work = self.work.len();
        let n_out = self.lattice.len();
        let m = self.generator.len();
        let mut values = vec![0.0; n_out * d];
        let mut a = vec![0.0; m.max(1)];
        let mut b = vec![0.0; m.max(1)];
        let mut path = vec![0.0; n_work];
        for pair in 0..d.div_ceil(2) {
            let mut rng = rng::stream(seed, &[purpose::EXACT_FBM, pair as u64]);
            self.generator.sample_pair(&mut rng, &mut a, &mut b);
            for (k, incr) in [&a, &b].into_iter().enumerate() {
                let comp = 2 * pair + k;
                if comp >= d {
                    break;
                }
                self.integrate(incr, &mut path, &mut rng);
                for i in 0..n_out {
                    values[i * d + comp] = path[self.offset + i];
                }
            }
        }
        FieldSample::new(self.params, self.lattice.clone(), d, values, seed, None)
    }
}

/// Exact fBm path(s) with index `H` on a one-dimensional lattice; `params`
/// must have `N = 1` and `γ = 0`. Each of the `d` components is independent.
pub fn exact_fbm_1d(lattice: &Lattice, params: &FieldParams, seed: u64) -> Result<FieldSample> {
    ExactFbm::new(lattice, params)?.sample(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use crate::variance_model::Hurst;

    fn params(h: f64, d: usize) -> FieldParams {
        FieldParams::new(1, d, Hurst::float(h).unwrap(), 0.0, 0.5).unwrap()
    }

    #[test]
    fn origin_value_is_zero_and_lengths_match() {
        let l = Lattice::new(vec![-0.5], vec![0.5], 1.0 / 64.0).unwrap();
        for h in [0.3, 0.5, 0.7] {
            let s = exact_fbm_1d(&l, &params(h, 3), 9).unwrap();
            assert_eq!(s.site_values(l.origin_index().unwrap()), &[0.0, 0.0, 0.0]);
            assert_eq!(s.values.len(), l.len() * 3);
        }
    }

    #[test]
    fn increment_variance_and_correlation() {
        // Var of unit-lag increment is h^{2H}; lag-one correlation is 2^{2H−1} − 1.
        let h = 0.7;
        let l = Lattice::new(vec![0.0], vec![1.0], 1.0 / 128.0).unwrap();
        let gen = ExactFbm::new(&l, &params(h, 2)).unwrap();
        let mut first = Vec::new();
        let mut second = Vec::new();
        for r in 0..2000 {
            let s = gen.sample(r).unwrap();
            for c in 0..2 {
                first.push(s.value(41, c) - s.value(40, c));
                second.push(s.value(42, c) - s.value(41, c));
            }
        }
        let var = stats::variance(&first);
        let want = (1.0f64 / 128.0).powf(2.0 * h);
        assert!((var / want - 1.0).abs() < 0.05, "{var} vs {want}");
        let rho = stats::correlation(&first, &second);
        let rho_want = 2f64.powf(2.0 * h - 1.0) - 1.0;
        assert!((rho - rho_want).abs() < 0.04, "{rho} vs {rho_want}");
    }

    #[test]
    fn brownian_off_origin_has_correct_marginal() {
        let l = Lattice::new(vec![0.5], vec![1.0], 1.0 / 64.0).unwrap();
        let gen = ExactFbm::new(&l, &params(0.5, 1)).unwrap();
        let ends: Vec<f64> = (0..4000).map(|r| gen.sample(r).unwrap().values[l.len() - 1]).collect();
        let var = stats::variance(&ends);
        assert!((var - 1.0).abs() < 0.07, "{var}");
    }

    #[test]
    fn fbm_off_origin_is_extended() {
        let l = Lattice::new(vec![0.5], vec![1.0], 1.0 / 64.0).unwrap();
        let gen = ExactFbm::new(&l, &params(0.3, 1)).unwrap();
        let ends: Vec<f64> = (0..3000).map(|r| gen.sample(r).unwrap().values[0]).collect();
        let var = stats::variance(&ends);
        let want = 0.5f64.powf(0.6);
        assert!((var / want - 1.0).abs() < 0.08, "{var} vs {want}");
    }
}
