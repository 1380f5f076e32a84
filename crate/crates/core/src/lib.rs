//! Readmission prediction for diabetic-patient encounter data.
//!
//! The crate is organised as a pipeline:
//!
//! - [`schema`] declares every column (kind, directives, vocabulary).
//! - [`ingest`] reads encounter CSVs and generates planted-signal synthetic tables.
//! - [`preprocess`] prunes records, relabels levels, engineers features, encodes
//!   strings into indices and standardizes continuous columns.
//! - [`smote`] balances the classes with SMOTE-NC.
//! - [`nncore`] holds the layer kernels with hand-written backward passes.
//! - [`model`] assembles the categorical-embedding network and trains it.
//! - [`metrics`] evaluates (AUROC, ROC, confusion), cross-validates and ranks
//!   features by permutation importance.
//!
//! All randomness is derived from explicit seeds through [`nncore::rng`], so a
//! fixed `(data, config, seed)` triple reproduces results bit for bit.

pub mod container;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod nncore;
pub mod preprocess;
pub mod schema;
pub mod smote;

pub use error::{Error, Result};
