//! Resolvent kernels of one-dimensional generalized diffusions whose scale
//! function may jump or stay flat, with matrix and Monte-Carlo oracles.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

// Negated comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity, clippy::needless_range_loop)]

pub mod boundary;
pub mod config;
pub mod fixtures;
pub mod harmonic;
pub mod kernel;
pub mod measure;
pub mod oracle;
pub mod pair;
pub mod poly;
pub mod quadrature;
pub mod scalar;
pub mod scale;
pub mod simulate;

pub use scalar::Scalar;

pub type SpeedMeasure = measure::SpeedMeasure<f64>;
pub type ScaleFunction = scale::ScaleFunction<f64>;
pub type QuasiPair = pair::QuasiPair<f64>;
