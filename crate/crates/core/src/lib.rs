//! Spiking neural networks trained with spatio-temporal backpropagation,
//! with temporal Fisher information analysis, adversarial and corruption
//! robustness evaluation, and magnitude pruning guided by the information
//! profile.

// `!(x >= 0.0)` style checks are used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod fisher;
pub mod harness;
pub mod lif;
pub mod network;
pub mod parallel;
pub mod pruning;
pub mod robustness;
pub mod seeds;
pub mod stbp;
pub mod tensor;

pub use error::{Error, Result};
