//! Dense numeric substrate: vectors and matrices of `f64`, activation
//! functions, the Adam optimizer, a central-difference gradient checker and
//! seeded random streams.
//!
//! All reductions sum in ascending index order.

mod adam;
mod dense;
mod gradcheck;
pub mod math;
mod rng;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use dense::{
    dot, matvec, relu, relu_grad, sigmoid, DenseMatrix, DenseVector, Parameters, TensorRef,
};
pub use gradcheck::{check_gradients, GradCheckConfig, GradCheckReport, GradFailure, Probe};
pub use rng::{derive_rng, seeded_rng, stream_seed, Rng};

use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("non-finite loss during gradient check")]
    NonFiniteLoss,
}
