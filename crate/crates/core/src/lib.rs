//! Numerical laboratory for solitary waves of the abcd Boussinesq system
//! over a slowly varying bottom.
//!
//! The numerical kernels are generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the working precision to `f64`.

pub mod approx;
pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod harness;
pub mod linop;
pub mod model;
pub mod scalar;
pub mod solitary;
pub mod spectral;
pub mod tracker;

pub use error::{Result, WaveError};
pub use scalar::Real;

pub type GridSpec64 = spectral::GridSpec<f64>;
pub type Grid64 = spectral::GridRef<f64>;
pub type Field64 = spectral::Field<f64>;
pub type FieldPair64 = spectral::FieldPair<f64>;
pub type AbcdParams64 = model::AbcdParams<f64>;
pub type BottomSpec64 = model::BottomSpec<f64>;
