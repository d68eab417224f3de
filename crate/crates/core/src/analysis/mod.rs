//! Verification layer: weighted norms, decomposition residuals, scaling fits,
//! spectral gap and contraction, and the statistical laws for the phase.

pub mod checks;
pub mod laws;
pub mod norms;
pub mod residual;
pub mod scaling;
pub mod spectral;
pub mod stats;

pub use norms::{NormSums, WeightedNormKit};
pub use residual::{residual_finite_m, residual_immediate, Decomposition, ResidualPoint};
