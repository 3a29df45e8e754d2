//! The JSON record a fit leaves behind.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{FoldAssignment, TrialTable};
use crate::error::{Error, Result};
use crate::eval::ConditionSummary;
use crate::fit::{CvOutcome, FitConfig, RawParams};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold_index: usize,
    pub heldout_conditions: Vec<String>,
    pub best_epoch: usize,
    pub raw_params: RawParams,
    pub sigma: Vec<f64>,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub train_nll: f64,
    pub heldout_nll: f64,
    pub train_curve: Vec<f64>,
    pub heldout_curve: Vec<f64>,
    pub condition_predictions: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub mean_heldout_nll: f64,
    pub pearson_r: f64,
    pub zero_variance: bool,
    pub conditions: Vec<ConditionSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub tool_version: String,
    /// Name of the feature set, e.g. the feature file stem.
    pub features_label: String,
    pub seed: u64,
    pub config: FitConfig,
    pub folds: FoldAssignment,
    pub trials_digest: String,
    pub n_trials: usize,
    pub fold_results: Vec<FoldReport>,
    pub summary: ReportSummary,
}

impl FitReport {
    pub fn new(
        features_label: impl Into<String>,
        config: &FitConfig,
        folds: &FoldAssignment,
        trials: &TrialTable,
        outcome: &CvOutcome,
    ) -> Self {
        let fold_results = outcome
            .folds
            .iter()
            .map(|f| FoldReport {
                fold_index: f.fold_index,
                heldout_conditions: f.heldout_conditions.clone(),
                best_epoch: f.best_epoch,
                raw_params: f.params.clone(),
                sigma: f.params.sigma(),
                gamma: f.params.gamma(),
                beta: f.params.beta(),
                train_nll: f.train_nll,
                heldout_nll: f.heldout_nll,
                train_curve: f.train_curve.clone(),
                heldout_curve: f.heldout_curve.clone(),
                condition_predictions: f.condition_predictions.clone(),
            })
            .collect();
        Self {
            tool_version: TOOL_VERSION.to_owned(),
            features_label: features_label.into(),
            seed: config.seed,
            config: config.clone(),
            folds: folds.clone(),
            trials_digest: trials.digest(),
            n_trials: trials.len(),
            fold_results,
            summary: ReportSummary {
                mean_heldout_nll: outcome.summary.mean_heldout_nll,
                pearson_r: outcome.summary.correlation.r,
                zero_variance: outcome.summary.correlation.zero_variance,
                conditions: outcome.summary.conditions.clone(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, Some(e.line() as u64), e.to_string()))
    }

    pub fn fold(&self, index: usize) -> Result<&FoldReport> {
        self.fold_results
            .iter()
            .find(|f| f.fold_index == index)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "fold {index} does not exist (report has {} folds)",
                    self.fold_results.len()
                ))
            })
    }

    /// Short human-readable summary.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "features: {}\nmodel: {}\naggregation: {}\nseed: {}\ntrials: {}\nfolds: {}\n",
            self.features_label,
            self.config.model_kind,
            self.config.aggregation,
            self.seed,
            self.n_trials,
            self.folds.k
        );
        out += &format!("cv nll: {:.3}\n", self.summary.mean_heldout_nll);
        out += &format!(
            "pearson r: {:.3}{}\n",
            self.summary.pearson_r,
            if self.summary.zero_variance { " (zero variance)" } else { "" }
        );
        out += "fold  best_epoch  train_nll  heldout_nll  gamma    beta\n";
        for f in &self.fold_results {
            out += &format!(
                "{:>4}  {:>10}  {:>9.3}  {:>11.3}  {:>7.3}  {}\n",
                f.fold_index,
                f.best_epoch,
                f.train_nll,
                f.heldout_nll,
                f.gamma,
                f.beta.map(|b| format!("{b:.3}")).unwrap_or_else(|| "-".into())
            );
        }
        out += "condition  n  observed  predicted\n";
        for c in &self.summary.conditions {
            out += &format!(
                "{}  {}  {:.3}  {:.3}\n",
                c.condition_id, c.n_trials, c.observed_accuracy, c.predicted_accuracy
            );
        }
        out
    }
}
