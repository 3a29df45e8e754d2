//! Maximum-likelihood fitting: exponential reparameterization, batched NLL
//! with exact gradients, Adam, and condition-level cross-validation.

mod adam;
mod config;
mod cv;
mod objective;
mod params;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use config::{FitConfig, DEFAULT_BATCH_SIZE, DEFAULT_CLAMP_EPS, DEFAULT_LEARNING_RATE, DEFAULT_MAX_EPOCHS};
pub use cv::{best_epoch, condition_correlation, cross_validate, fit_fold, CvOutcome, CvSummary, FoldResult};
pub use objective::{nll_and_grad, CompiledTrial, Evaluation, Objective};
pub use params::RawParams;
