//! Sub-sampled adaptive cubic regularization for finite-sum objectives.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod cubic;
pub mod data;
pub mod error;
pub mod linalg;
pub mod problem;
pub mod sampling;
pub mod saarc;
pub mod sarc;
pub mod trace;

pub use error::{Error, Result};
