//! Scale matrices and ω-killed fluctuation identities for Markov-modulated
//! Brownian motion.
//!
//! The generic core runs in `f32` or `f64` through [`Real`]. The aliases at
//! the bottom of this file fix `f64`, which is what the documented
//! tolerances refer to.

pub mod dividends;
pub mod error;
pub mod fluctuation;
pub mod matrix;
pub mod matrix_engine;
pub mod mc;
pub mod model;
pub mod presets;
pub mod scale_classic;
pub mod scale_omega;
pub mod scalar;

pub use error::{Error, Result};
pub use matrix::{Lu, Mat};
pub use scalar::Real;

pub type Matrix = Mat<f64>;
pub type Model = model::MapModel<f64>;
pub type Omega = model::OmegaFn<f64>;
pub type Grid = model::MatrixGrid<f64>;
pub type ScaleSet = scale_omega::OmegaScaleSet<f64>;
pub type Classic = scale_classic::ClassicScale<f64>;
pub type Exit = fluctuation::ExitResult<f64>;
pub type Dividend = dividends::DividendQuery<f64>;
