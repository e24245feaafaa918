//! Generative sufficient dimension reduction: joint estimation of a
//! low-dimensional representation of the covariates and a conditional
//! velocity field by regression on stochastic-interpolation targets, with a
//! probability-flow ODE sampler, a closed-form Gaussian oracle for
//! verification, simulation benchmarks, and a kernel-ensemble extension for
//! SPD-matrix responses.
//!
//! The numeric core is generic over the scalar type through [`Real`]
//! (`f32` or `f64`); the aliases below fix `f64`, which everything
//! user-facing uses.

pub mod bench;
pub mod error;
pub mod interpolant;
pub mod io;
pub mod metrics;
pub mod numerics;
pub mod oracle;
pub mod real;
pub mod rng;
pub mod sampler;
pub mod simgen;
pub mod trainer;

pub use error::{Error, Result};
pub use real::Real;

/// Default-precision aliases.
pub type Matrix = numerics::Matrix<f64>;
pub type MlpSpec = numerics::MlpSpec<f64>;
pub type MlpParams = numerics::MlpParams<f64>;
pub type GenSdrModel = trainer::GenSdrModel<f64>;
pub type EnsembleModel = trainer::ensemble::EnsembleModel<f64>;
pub type EnsembleSpec = trainer::ensemble::EnsembleSpec<f64>;
pub type Dataset = simgen::Dataset<f64>;
pub type ResponseSet = simgen::ResponseSet<f64>;
pub type SpdMatrix2 = simgen::spd::SpdMatrix2<f64>;
pub type OdeGrid = sampler::OdeGrid<f64>;
pub type CsiBatch = interpolant::CsiBatch<f64>;
