use serde::{Deserialize, Serialize};

use crate::data::TrialTable;
use crate::error::{Error, Result};
use crate::report::FitReport;
use crate::similarity::ModelKind;

pub const COMPARISON_HEADER: &str = "features,model,nll,pearson_r,zero_variance_flag,noise_ceiling";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub features: String,
    pub model: ModelKind,
    pub nll: f64,
    pub pearson_r: f64,
    pub zero_variance: bool,
    pub noise_ceiling: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

/// One row per report, sorted by cross-validated NLL (lowest first).
///
/// All reports must come from the same trial table and fold assignment; when
/// `trials` is given it must match them too.
pub fn compare_models(reports: &[FitReport], trials: Option<&TrialTable>, noise_ceiling: Option<f64>) -> Result<ComparisonTable> {
    let first = reports.first().ok_or(Error::Empty("no reports to compare"))?;
    for r in &reports[1..] {
        if r.folds != first.folds {
            return Err(Error::Validation(format!(
                "report '{}' ({}) uses a different fold assignment than '{}' ({})",
                r.features_label, r.config.model_kind, first.features_label, first.config.model_kind
            )));
        }
        if r.trials_digest != first.trials_digest {
            return Err(Error::Validation(format!(
                "report '{}' ({}) was fit to a different trial table than '{}' ({})",
                r.features_label, r.config.model_kind, first.features_label, first.config.model_kind
            )));
        }
    }
    if let Some(t) = trials {
        if t.digest() != first.trials_digest {
            return Err(Error::Validation("reports were fit to a different trial table".into()));
        }
    }
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| ComparisonRow {
            features: r.features_label.clone(),
            model: r.config.model_kind,
            nll: r.summary.mean_heldout_nll,
            pearson_r: r.summary.pearson_r,
            zero_variance: r.summary.zero_variance,
            noise_ceiling,
        })
        .collect();
    rows.sort_by(|a, b| a.nll.total_cmp(&b.nll));
    Ok(ComparisonTable { rows })
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(COMPARISON_HEADER.split(',')).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.features.clone(),
                r.model.to_string(),
                format!("{:.3}", r.nll),
                format!("{:.3}", r.pearson_r),
                u8::from(r.zero_variance).to_string(),
                r.noise_ceiling.map(|c| format!("{c:.3}")).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.features.len()).max().unwrap_or(0).max(8);
        let mut out = format!("{:<width$}  {:<9}  {:>6}  {:>7}\n", "features", "model", "nll", "r");
        for r in &self.rows {
            let flag = if r.zero_variance { " (zero variance)" } else { "" };
            out += &format!(
                "{:<width$}  {:<9}  {:>6.3}  {:>7.3}{flag}\n",
                r.features,
                r.model.as_str(),
                r.nll,
                r.pearson_r
            );
        }
        if let Some(c) = self.rows.first().and_then(|r| r.noise_ceiling) {
            out += &format!("noise ceiling: {c:.3}\n");
        }
        out
    }
}
