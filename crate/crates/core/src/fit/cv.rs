use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{FoldAssignment, Stimuli, TrialRecord, TrialTable};
use crate::error::{Error, Result};
use crate::eval::{condition_summaries, pearson, ConditionSummary, Correlation};
use crate::fit::adam::{adam_step, AdamState};
use crate::fit::config::FitConfig;
use crate::fit::objective::{CompiledTrial, Objective};
use crate::fit::params::RawParams;
use crate::rng::{stream, PortableRng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_index: usize,
    /// Epoch whose parameters were kept; 0 means the initial parameters.
    pub best_epoch: usize,
    pub params: RawParams,
    pub train_nll: f64,
    pub heldout_nll: f64,
    /// NLL after each epoch, starting with the initial parameters.
    pub train_curve: Vec<f64>,
    pub heldout_curve: Vec<f64>,
    pub heldout_conditions: Vec<String>,
    /// Mean predicted probability of a correct choice per held-out condition.
    pub condition_predictions: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    /// Held-out NLL averaged across folds.
    pub mean_heldout_nll: f64,
    /// Per-trial probability from the fold that held the trial out, aligned
    /// with the input trial table.
    pub pooled_probabilities: Vec<f64>,
    pub conditions: Vec<ConditionSummary>,
    pub correlation: Correlation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub folds: Vec<FoldResult>,
    pub summary: CvSummary,
}

/// Index of the smallest value; ties go to the earliest.
pub fn best_epoch(curve: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in curve.iter().enumerate() {
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Fits one fold on `train`, keeping the epoch with the lowest held-out NLL.
pub fn fit_fold(
    train: &[TrialRecord],
    heldout: &[TrialRecord],
    stimuli: &Stimuli<'_>,
    cfg: &FitConfig,
    fold_index: usize,
) -> Result<FoldResult> {
    cfg.validate()?;
    let mut objective = Objective::new(stimuli, cfg.model_kind, cfg.aggregation, cfg.clamp_eps, cfg.execution)?;
    objective.cache_pairs(&objective.compile(train)?);
    objective.cache_pairs(&objective.compile(heldout)?);
    fit_compiled(&objective, train, heldout, cfg, fold_index)
}

fn fit_compiled(
    objective: &Objective,
    train: &[TrialRecord],
    heldout: &[TrialRecord],
    cfg: &FitConfig,
    fold_index: usize,
) -> Result<FoldResult> {
    if train.is_empty() {
        return Err(Error::Validation(format!("fold {fold_index}: empty training split")));
    }
    if heldout.is_empty() {
        return Err(Error::Validation(format!("fold {fold_index}: empty held-out split")));
    }
    let train_c = objective.compile(train)?;
    let heldout_c = objective.compile(heldout)?;
    let dim = objective.dim();
    let kind = objective.kind();
    let hyper = cfg.adam();
    let non_finite = |epoch, batch| Error::NonFiniteLoss {
        fold: fold_index,
        epoch,
        batch,
    };

    let mut params = RawParams::init(dim, kind);
    let mut flat = params.to_flat();
    let mut adam = AdamState::new(flat.len());
    let mut rng = PortableRng::new(cfg.seed, stream::MINIBATCH.wrapping_add(fold_index as u64));
    let mut order: Vec<usize> = (0..train_c.len()).collect();
    let mut batch: Vec<CompiledTrial> = Vec::with_capacity(cfg.batch_size);

    let score = |params: &RawParams, epoch: usize| -> Result<(f64, f64)> {
        let tr = objective.evaluate(params, &train_c, false)?.nll;
        let ho = objective.evaluate(params, &heldout_c, false)?.nll;
        if !(tr.is_finite() && ho.is_finite()) {
            return Err(non_finite(epoch, 0));
        }
        Ok((tr, ho))
    };

    let (tr0, ho0) = score(&params, 0)?;
    let mut train_curve = vec![tr0];
    let mut heldout_curve = vec![ho0];
    let mut best = (0usize, ho0, params.clone());

    for epoch in 1..=cfg.max_epochs {
        rng.shuffle(&mut order);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train_c[i]));
            let eval = objective.evaluate(&params, &batch, true)?;
            let mut grad = eval.grad.expect("gradient requested");
            if cfg.l2_penalty > 0.0 {
                for (g, s) in grad.iter_mut().zip(&params.s) {
                    *g += 2.0 * cfg.l2_penalty * s;
                }
            }
            if !eval.nll.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(non_finite(epoch, b + 1));
            }
            adam_step(&mut adam, &mut flat, &grad, hyper);
            params = RawParams::from_flat(&flat, dim, kind).map_err(|_| non_finite(epoch, b + 1))?;
        }
        let (tr, ho) = score(&params, epoch)?;
        train_curve.push(tr);
        heldout_curve.push(ho);
        if ho < best.1 {
            best = (epoch, ho, params.clone());
        }
    }

    let (best_epoch, heldout_nll, params) = best;
    let probs = objective.probabilities(&params, &heldout_c)?;
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (t, p) in heldout.iter().zip(&probs) {
        let e = sums.entry(t.condition_id.clone()).or_default();
        e.0 += p;
        e.1 += 1;
    }
    Ok(FoldResult {
        fold_index,
        best_epoch,
        train_nll: train_curve[best_epoch],
        heldout_nll,
        params,
        train_curve,
        heldout_curve,
        heldout_conditions: sums.keys().cloned().collect(),
        condition_predictions: sums.into_iter().map(|(c, (s, n))| (c, s / n as f64)).collect(),
    })
}

/// K-fold cross-validation over test conditions.
pub fn cross_validate(
    trials: &TrialTable,
    folds: &FoldAssignment,
    stimuli: &Stimuli<'_>,
    cfg: &FitConfig,
) -> Result<CvOutcome> {
    cfg.validate()?;
    if trials.is_empty() {
        return Err(Error::Empty("trial table"));
    }
    let mut fold_of = Vec::with_capacity(trials.len());
    for t in trials.records() {
        let f = folds.fold_of(&t.condition_id).ok_or_else(|| {
            Error::Validation(format!("condition '{}' has no fold", t.condition_id))
        })?;
        fold_of.push(f);
    }

    let mut objective = Objective::new(stimuli, cfg.model_kind, cfg.aggregation, cfg.clamp_eps, cfg.execution)?;
    objective.cache_pairs(&objective.compile(trials.records())?);
    let split = |f: usize| -> (Vec<TrialRecord>, Vec<TrialRecord>) {
        let mut train = Vec::new();
        let mut heldout = Vec::new();
        for (t, &tf) in trials.records().iter().zip(&fold_of) {
            if tf == f {
                heldout.push(t.clone());
            } else {
                train.push(t.clone());
            }
        }
        (train, heldout)
    };

    let results = cfg.execution.map_range(folds.k, |f| {
        let (train, heldout) = split(f);
        fit_compiled(&objective, &train, &heldout, cfg, f)
    });
    let fold_results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut pooled = vec![f64::NAN; trials.len()];
    for result in &fold_results {
        let idx: Vec<usize> = (0..trials.len()).filter(|&i| fold_of[i] == result.fold_index).collect();
        let held: Vec<TrialRecord> = idx.iter().map(|&i| trials.records()[i].clone()).collect();
        let probs = objective.probabilities(&result.params, &objective.compile(&held)?)?;
        for (i, p) in idx.into_iter().zip(probs) {
            pooled[i] = p;
        }
    }

    let mean_heldout_nll =
        fold_results.iter().map(|r| r.heldout_nll).sum::<f64>() / fold_results.len() as f64;
    let conditions = condition_summaries(trials.records(), &pooled)?;
    let correlation = condition_correlation(&conditions)?;
    Ok(CvOutcome {
        folds: fold_results,
        summary: CvSummary {
            mean_heldout_nll,
            pooled_probabilities: pooled,
            conditions,
            correlation,
        },
    })
}

/// Pearson correlation of predicted against observed condition accuracy.
pub fn condition_correlation(conditions: &[ConditionSummary]) -> Result<Correlation> {
    let predicted: Vec<f64> = conditions.iter().map(|c| c.predicted_accuracy).collect();
    let observed: Vec<f64> = conditions.iter().map(|c| c.observed_accuracy).collect();
    pearson(&predicted, &observed)
}
