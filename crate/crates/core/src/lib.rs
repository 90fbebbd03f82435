//! Class-specific subspace discriminant analysis with null-space,
//! orthogonal and heterogeneous solvers, plus the evaluation pipeline.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csda;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod hetero;
pub mod kernel;
pub mod kmeans;
pub mod linalg;
pub mod nullspace;
pub mod orthogonal;
pub mod rng;
pub mod scatter;

pub use error::{Error, Result};
