//! Sample-conditioned generative models for signals on regular grids.
//!
//! A model maps an observed set of `(position, value)` samples and a query
//! position to a mixture of per-bin Gaussians over the value at that query.
//! Inference reads either the expected value or draws whole signals one
//! location at a time.

// `!(x > 0.0)` is the NaN-rejecting form used in validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Tape ops are fallible, so they cannot be the std operator traits.
#![allow(clippy::should_implement_trait)]

pub mod distribution;
pub mod error;
pub mod inference;
pub mod model;
pub mod sample;
pub mod signals;
pub mod tensor;
pub mod training;

pub use distribution::{make_bins, BinLayout, DistParams};
pub use error::{Error, Result};
pub use model::{Model, ModelConfig, ModelParams};
pub use sample::{QueryBatch, SampleSet};
pub use signals::Signal;
pub use tensor::{Precision, Scalar, Tape, Tensor, Var};
