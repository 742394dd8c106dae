//! Multimodal fusion-and-attribution engine.
//!
//! Per-source embeddings are assembled into fusion vectors, every non-empty
//! subset of sources gets its own gradient-boosted model evaluated by AUROC
//! under patient-grouped splits, and the resulting subset scores are
//! attributed back to sources and modalities with exact Shapley values.

pub mod attribution;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod featurization;
pub mod harness;
pub mod learner;
pub mod matrix;
pub mod record_store;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};
pub use matrix::Matrix;
