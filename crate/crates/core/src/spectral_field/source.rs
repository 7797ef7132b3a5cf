use super::fbm::ExactFbm;
use super::lattice::Lattice;
use super::model::SpectralModel;
use super::sample::FieldSample;
use super::synth::{synthesize_with_grid, SpectralGrid, SynthesisConfig};
use crate::error::{Error, Result};
use crate::variance_model::FieldParams;

/// Where field samples come from.
#[derive(Debug, Clone)]
pub enum FieldSource {
    /// Exact fractional Brownian motion (`N = 1`, `γ = 0`).
    ExactFbm(FieldParams),
    /// Spectral synthesis with the given model.
    Spectral(SpectralModel),
}

impl FieldSource {
    pub fn params(&self) -> &FieldParams {
        match self {
            FieldSource::ExactFbm(p) => p,
            FieldSource::Spectral(m) => m.params(),
        }
    }

    /// Precompute everything that depends only on the lattice.
    pub fn prepare(&self, lattice: &Lattice) -> Result<PreparedSource> {
        Ok(match self {
            FieldSource::ExactFbm(p) => PreparedSource::Exact(ExactFbm::new(lattice, p)?),
            FieldSource::Spectral(m) => PreparedSource::Spectral {
                model: m.clone(),
                grid: SpectralGrid::new(m, lattice, &[], &SynthesisConfig::default())?,
                lattice: lattice.clone(),
            },
        })
    }

    /// `E|X₁(t + ℓ) − X₁(t)|²` at `|ℓ| = lag`.
    pub fn variogram(&self, lag: f64) -> Result<f64> {
        match self {
            FieldSource::ExactFbm(p) => Ok(lag.abs().powf(2.0 * p.h())),
            FieldSource::Spectral(m) => m.variogram(lag),
        }
    }

    /// `E[X₁(s) X₁(t)]`.
    pub fn covariance(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        let n = self.params().n();
        if s.len() != n || t.len() != n {
            return Err(Error::domain("covariance points must have the field's domain dimension"));
        }
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
        Ok(0.5 * (self.variogram(norm(s))? + self.variogram(norm(t))? - self.variogram(norm(&diff))?))
    }

    pub fn label(&self) -> &'static str {
        match self {
            FieldSource::ExactFbm(_) => "exact-fbm",
            FieldSource::Spectral(_) => "spectral",
        }
    }
}

pub enum PreparedSource {
    Exact(ExactFbm),
    Spectral { model: SpectralModel, grid: SpectralGrid, lattice: Lattice },
}

impl PreparedSource {
    pub fn sample(&self, seed: u64) -> Result<FieldSample> {
        match self {
            PreparedSource::Exact(g) => g.sample(seed),
            PreparedSource::Spectral { model, grid, lattice } => synthesize_with_grid(lattice, model, grid, seed, None),
        }
    }
}
