//! Lattice samples of the field through its spectral representation, band
//! truncation, exact fBm oracles and empirical checks of the variance model.

mod fbm;
mod lattice;
mod model;
mod sample;
mod source;
pub mod special;
mod synth;
mod validate;

pub use fbm::{exact_fbm_1d, ExactFbm, FgnGenerator};
pub use lattice::{Lattice, DEFAULT_SITE_BUDGET};
pub use model::SpectralModel;
pub use sample::{Band, FieldSample};
pub use source::{FieldSource, PreparedSource};
pub use synth::{synthesize, synthesize_with_grid, SpectralCell, SpectralGrid, SynthesisConfig};
pub use validate::{
    conditional_variance, empirical_variogram, slnd_probe, truncation_bound, truncation_variance, ConditionalVariance,
    SlndProbe, TruncationBound, VariogramEstimate, MIN_VARIOGRAM_SAMPLES,
};
