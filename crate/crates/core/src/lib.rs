//! Prototype and exemplar models of two-alternative forced-choice object
//! recognition, fit by maximum likelihood over per-stimulus feature vectors
//! and scored against trial-level behavior.
//!
//! The pipeline: load a [`data::StimulusCatalog`], a [`data::FeatureStore`]
//! and a [`data::TrialTable`]; assign test conditions to folds with
//! [`data::assign_folds`]; fit with [`fit::cross_validate`]; compare fits
//! with [`eval::compare_models`] against the split-half
//! [`eval::noise_ceiling`].

pub mod data;
pub mod error;
pub mod eval;
pub mod exec;
pub mod fit;
pub mod report;
pub mod rng;
pub mod similarity;
pub mod synth;

pub use error::{Error, Result};
pub use exec::Execution;
pub use report::FitReport;
pub use similarity::{Aggregation, ModelKind};
