//! Model comparison: cross-validated NLL, condition-level correlation and
//! the split-half noise ceiling.

mod ceiling;
mod compare;
mod metrics;
mod svg;

pub use ceiling::{noise_ceiling, NoiseCeilingEstimate, DEFAULT_REPEATS};
pub use compare::{compare_models, ComparisonRow, ComparisonTable, COMPARISON_HEADER};
pub use metrics::{
    condition_summaries, mean_nll, pearson, spearman_brown, ConditionSummary, Corrected, CorrectionFlag, Correlation,
};
pub use svg::scatter_svg;
