// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod ensemble;
pub mod error;
pub mod estimator;
pub mod functional;
pub mod harness;
pub mod kernel;
pub mod normal;
pub mod quadrature;
pub mod rng;
pub mod sample;
pub mod stats;

pub use error::{OdinError, Result};
