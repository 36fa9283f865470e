//! Numerical toolkit for the spectral edge of deformed Wigner matrices
//! `H = lambda0 V + W`.
//!
//! The deterministic kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! Monte Carlo layers work in `f64`. Aliases for the common `f64` types are
//! exported at the crate root.

pub mod dbm;
pub mod edgescale;
pub mod ensemble;
pub mod error;
pub mod freeconv;
pub mod linalg;
pub mod measure;
pub mod quadrature;
pub mod resolvent;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod twstats;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Measure = measure::Measure<f64>;
pub type SpectralPoint = measure::SpectralPoint<f64>;
pub type EdgeScaling = edgescale::EdgeScaling<f64>;
pub type FreeConvolutionSolution = freeconv::FreeConvolutionSolution<f64>;
pub type GreenEvaluation = resolvent::GreenEvaluation<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type Complex = num_complex::Complex<f64>;
