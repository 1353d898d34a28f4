//! Residual hybrid motion models: a physics-based predictor corrected by an LSTM.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod dual;
pub mod error;
pub mod eval;
pub mod hybrid;
pub mod linalg;
pub mod neural;
pub mod ode;
pub mod physical;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Concrete `f64` instances of the generic model types.
pub type HybridModelF64 = hybrid::HybridModel<f64>;
pub type CheckpointF64 = hybrid::Checkpoint<f64>;
pub type CorrectorF64 = neural::Corrector<f64>;
