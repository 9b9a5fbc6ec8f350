//! Implicit bias of gradient descent on linear networks.
//!
//! Fully connected, diagonal and full-width circular convolutional linear
//! networks trained with the exponential loss on separable data, together
//! with independent reference solvers (hard-margin SVM, `ℓ1` max margin in
//! the Fourier basis) and first-order certificates for the limit directions.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod certify;
pub mod data;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod models;
pub mod rng;
pub mod spectral;
pub mod training;

pub use certify::{KktCertificate, SolverReport, SolverStatus};
pub use data::Dataset;
pub use datagen::{GenKind, GenSpec};
pub use error::{Error, Result};
pub use models::{ArchKind, Architecture, NetworkParams, Predictor};
pub use spectral::ComplexVec;
pub use training::{StepPolicy, TrainConfig, TrainTrace};
