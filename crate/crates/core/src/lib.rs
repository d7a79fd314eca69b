//! Piecewise-linear gauge functions for geometric multivariate extremes.
//!
//! The crate is `no_std` with `alloc`. Floating point maths goes through
//! `libm`; randomness is always supplied by the caller so that every
//! routine is reproducible from a seed.

#![no_std]

extern crate alloc;

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod fitting;
pub mod gauge;
pub mod linalg;
pub mod optim;
pub mod roots;
pub mod sampling;
pub mod simplex;
pub mod special;
pub mod threshold;

pub use error::{Error, Result};

pub use fitting::{ExceedanceSample, FitConfig, FitMode, FittedModel, Setup};
pub use gauge::{Gauge, ParametricGauge, PwlGauge};
pub use simplex::{Angle, Domain, SimplexMesh};
pub use threshold::{Kernel, RadialThreshold, ThresholdModel, ThresholdParams};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
