use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::TrialRecord;
use crate::error::{Error, Result};

/// Observed and predicted accuracy for one test condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition_id: String,
    pub n_trials: usize,
    pub observed_accuracy: f64,
    pub predicted_accuracy: f64,
}

/// Pearson r with an explicit flag for constant inputs, where r is
/// undefined and reported as 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub zero_variance: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionFlag {
    /// Corrected value exceeded 1 and was clamped.
    Clamped,
    /// r = -1, where the correction divides by zero; value is -1.
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corrected {
    pub value: f64,
    pub flag: Option<CorrectionFlag>,
}

/// Negative mean of per-trial log-likelihoods.
pub fn mean_nll(per_trial_ll: &[f64]) -> Result<f64> {
    if per_trial_ll.is_empty() {
        return Err(Error::Empty("log-likelihoods"));
    }
    Ok(-per_trial_ll.iter().sum::<f64>() / per_trial_ll.len() as f64)
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::Validation("correlation needs at least two points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Correlation { r: 0.0, zero_variance: true });
    }
    // sqrt(a) * sqrt(a) can differ from a; sqrt(a * a) cannot, which keeps
    // r exactly 1 for identical inputs.
    let denom = if sxx == syy { sxx } else { (sxx * syy).sqrt() };
    Ok(Correlation {
        r: (sxy / denom).clamp(-1.0, 1.0),
        zero_variance: false,
    })
}

/// Spearman-Brown prophecy for doubling test length, `2r / (1 + r)`.
pub fn spearman_brown(r: f64) -> Result<Corrected> {
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::Validation(format!("correlation {r} outside [-1, 1]")));
    }
    if r == -1.0 {
        return Ok(Corrected {
            value: -1.0,
            flag: Some(CorrectionFlag::Degenerate),
        });
    }
    let value = 2.0 * r / (1.0 + r);
    Ok(if value > 1.0 {
        Corrected {
            value: 1.0,
            flag: Some(CorrectionFlag::Clamped),
        }
    } else {
        Corrected { value, flag: None }
    })
}

/// Groups trials by condition: observed fraction correct against mean
/// predicted probability. Sorted by condition id.
pub fn condition_summaries(trials: &[TrialRecord], per_trial_p: &[f64]) -> Result<Vec<ConditionSummary>> {
    if per_trial_p.len() != trials.len() {
        return Err(Error::Validation(format!(
            "{} predictions for {} trials",
            per_trial_p.len(),
            trials.len()
        )));
    }
    let mut acc: BTreeMap<&str, (usize, usize, f64)> = BTreeMap::new();
    for (i, (t, &p)) in trials.iter().zip(per_trial_p).enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Validation(format!("trial {i}: missing or invalid prediction {p}")));
        }
        let e = acc.entry(&t.condition_id).or_default();
        e.0 += 1;
        e.1 += usize::from(t.correct);
        e.2 += p;
    }
    Ok(acc
        .into_iter()
        .map(|(c, (n, k, p))| ConditionSummary {
            condition_id: c.to_owned(),
            n_trials: n,
            observed_accuracy: k as f64 / n as f64,
            predicted_accuracy: p / n as f64,
        })
        .collect())
}
