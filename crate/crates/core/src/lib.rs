//! Synthetic vehicle-claims auditing data and an unsupervised anomaly
//! detection benchmark.
//!
//! The crate is organized as a pipeline:
//!
//! - [`vcgen`] builds labeled claim datasets from a base vehicle population.
//! - [`encode`] turns a labeled string table into dense matrices using label,
//!   one-hot, GEL or embedding representations of the categorical columns.
//! - [`detect`] holds the unsupervised scorers (SOM, Isolation Forest, LOF,
//!   autoencoder, z-score).
//! - [`eval`] splits data and computes AUC and the weighted-F1 threshold sweep.
//! - [`pipeline`] wires the stages together and persists every artifact.

pub mod detect;
pub mod encode;
mod error;
pub mod eval;
pub mod pipeline;
pub mod rng;
pub mod table;
pub mod vcgen;

pub use error::{Error, Result};
