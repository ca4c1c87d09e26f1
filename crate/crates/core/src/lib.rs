//! Euler–Zeitlin dynamics on `su(N)` with large-scale model reduction.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the experiment
//! pipeline and the CLI use.

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod integrators;
pub mod matrix;
pub mod scalar;
pub mod spectral;
pub mod sph;
pub mod stochastic;
pub mod tridiag;

pub use error::{Error, Result};
pub use matrix::{VorticityMatrix, ZMatrix};
pub use scalar::Real;
pub use spectral::{BasisCache, CoeffField};

pub type Basis = BasisCache<f64>;
pub type Vorticity = ZMatrix<f64>;
pub type Coeffs = CoeffField<f64>;
