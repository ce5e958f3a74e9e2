//! Multiclass classification with parameterized quantum circuits.
//!
//! The crate is a small laboratory: a dense state-vector simulator, Pauli and
//! projector observables, a data re-uploading ansatz with adjoint gradients,
//! the four observable/loss model kinds, an Adam trainer, synthetic datasets,
//! and experiment drivers for loss-variance and neural-collapse studies.

pub mod circuit;
pub mod classifier;
pub mod data;
pub mod error;
pub mod lab;
pub mod pauli;
pub mod statevec;
pub mod trainer;

pub use error::{Error, Result};
