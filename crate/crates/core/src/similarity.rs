//! Distances, prototype and exemplar similarities, the two-alternative
//! choice rule and the trial log-likelihood.
//!
//! Everything is computed in the log domain: a similarity `exp(-D)` for a
//! few hundred feature dimensions underflows long before the choice rule
//! sees it, while its log is an ordinary number. These functions are the
//! straightforward per-trial route; the fit engine has its own batched
//! implementation with gradients and is checked against this one.

use serde::{Deserialize, Serialize};

use crate::data::{Stimuli, TrialRecord};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Prototype,
    Exemplar,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Prototype => "prototype",
            ModelKind::Exemplar => "exemplar",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prototype" | "proto" => Ok(Self::Prototype),
            "exemplar" | "exem" => Ok(Self::Exemplar),
            other => Err(Error::Config(format!("unknown model kind '{other}'"))),
        }
    }
}

/// How per-frame similarities of a test animation become one trial
/// prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Average the frame similarities of each animation, then apply the
    /// choice rule once.
    #[default]
    SimMean,
    /// Apply the choice rule to every (familiar frame, novel frame) pair and
    /// average the probabilities.
    ProbMean,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::SimMean => "sim_mean",
            Aggregation::ProbMean => "prob_mean",
        }
    }
}

impl std::fmt::Display for Aggregation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sim_mean" | "sim-mean" => Ok(Self::SimMean),
            "prob_mean" | "prob-mean" => Ok(Self::ProbMean),
            other => Err(Error::Config(format!("unknown aggregation '{other}'"))),
        }
    }
}

/// Diagonal Mahalanobis weights, one per feature dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionWeights(Vec<f64>);

impl AttentionWeights {
    pub fn new(sigma: Vec<f64>) -> Result<Self> {
        if let Some(i) = sigma.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Validation(format!(
                "attention weight {i} must be finite and nonnegative, got {}",
                sigma[i]
            )));
        }
        Ok(Self(sigma))
    }

    pub fn uniform(dim: usize, value: f64) -> Self {
        Self(vec![value; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceParams {
    pub gamma: f64,
    /// Similarity decay; only the exemplar model has one.
    pub beta: Option<f64>,
}

impl ChoiceParams {
    pub fn new(gamma: f64, beta: Option<f64>) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Validation(format!("gamma must be positive, got {gamma}")));
        }
        if let Some(b) = beta {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::Validation(format!("beta must be positive, got {b}")));
            }
        }
        Ok(Self { gamma, beta })
    }
}

/// The familiar category as the model stores it.
#[derive(Clone, Debug, PartialEq)]
pub enum CategoryRepresentation {
    Prototype(Vec<f64>),
    Exemplar(Vec<Vec<f64>>),
}

impl CategoryRepresentation {
    pub fn build(kind: ModelKind, members: Vec<Vec<f64>>) -> Result<Self> {
        match kind {
            ModelKind::Prototype => prototype_of(&members).map(Self::Prototype),
            ModelKind::Exemplar => {
                if members.is_empty() {
                    return Err(Error::Empty("exemplar set"));
                }
                Ok(Self::Exemplar(members))
            }
        }
    }

    /// Representation of an imprinting animation's frames.
    pub fn from_animation(kind: ModelKind, animation_id: &str, stimuli: &Stimuli<'_>) -> Result<Self> {
        let set = stimuli.imprinting_set(animation_id)?;
        Self::build(kind, stimuli.frames(&set.animation_id)?)
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Prototype(_) => ModelKind::Prototype,
            Self::Exemplar(_) => ModelKind::Exemplar,
        }
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: a, found: b })
    }
}

/// Squared diagonal Mahalanobis distance `sum_i sigma_i (x_i - y_i)^2`.
pub fn mahalanobis_sq(y: &[f64], x: &[f64], w: &AttentionWeights) -> Result<f64> {
    check_dims(w.len(), y.len())?;
    check_dims(w.len(), x.len())?;
    Ok(w.0
        .iter()
        .zip(x.iter().zip(y))
        .map(|(s, (a, b))| s * (a - b) * (a - b))
        .sum())
}

/// Componentwise mean of the members.
pub fn prototype_of(members: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = members.first().ok_or(Error::Empty("prototype of an empty set"))?;
    let mut sum = vec![0.0; first.len()];
    for m in members {
        check_dims(sum.len(), m.len())?;
        for (acc, v) in sum.iter_mut().zip(m) {
            *acc += v;
        }
    }
    let n = members.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// `log(sum_i exp(x_i))`, shifted by the maximum.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log(mean_i exp(x_i))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// Log prototype similarity, i.e. `-D(y, c)`.
pub fn log_sim_prototype(y: &[f64], c: &[f64], w: &AttentionWeights) -> Result<f64> {
    Ok(-mahalanobis_sq(y, c, w)?)
}

/// Log exemplar similarity `log sum_x exp(-beta D(y, x))`.
pub fn log_sim_exemplar(y: &[f64], exemplars: &[Vec<f64>], w: &AttentionWeights, beta: f64) -> Result<f64> {
    if exemplars.is_empty() {
        return Err(Error::Empty("exemplar set"));
    }
    let terms = exemplars
        .iter()
        .map(|x| mahalanobis_sq(y, x, w).map(|d| -beta * d))
        .collect::<Result<Vec<_>>>()?;
    Ok(log_sum_exp(&terms))
}

/// Logistic function with exact antisymmetry: `sigmoid(-z) == 1 - sigmoid(z)`
/// bit for bit.
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        1.0 - 1.0 / (1.0 + z.exp())
    }
}

/// Probability of choosing the first stimulus,
/// `Sim+^g / (Sim+^g + Sim-^g) = 1 / (1 + exp(-g (logS+ - logS-)))`.
pub fn choice_probability(log_sim_pos: f64, log_sim_neg: f64, gamma: f64) -> Result<f64> {
    if !(log_sim_pos.is_finite() && log_sim_neg.is_finite() && gamma.is_finite()) {
        return Err(Error::NonFinite(format!(
            "choice rule inputs ({log_sim_pos}, {log_sim_neg}, gamma {gamma})"
        )));
    }
    Ok(sigmoid(gamma * (log_sim_pos - log_sim_neg)))
}

/// Log similarity of one test frame to the category.
pub fn frame_log_sim(
    y: &[f64],
    rep: &CategoryRepresentation,
    w: &AttentionWeights,
    params: &ChoiceParams,
) -> Result<f64> {
    match rep {
        CategoryRepresentation::Prototype(c) => log_sim_prototype(y, c, w),
        CategoryRepresentation::Exemplar(xs) => {
            let beta = params
                .beta
                .ok_or_else(|| Error::Config("exemplar model requires beta".into()))?;
            log_sim_exemplar(y, xs, w, beta)
        }
    }
}

/// Log similarity of every frame of an animation, in frame order.
pub fn frame_log_sims(
    animation_id: &str,
    rep: &CategoryRepresentation,
    w: &AttentionWeights,
    params: &ChoiceParams,
    stimuli: &Stimuli<'_>,
) -> Result<Vec<f64>> {
    let frames = stimuli.frames(animation_id)?;
    if frames.is_empty() {
        return Err(Error::Empty("animation has no frames"));
    }
    frames.iter().map(|y| frame_log_sim(y, rep, w, params)).collect()
}

/// Log of the mean frame similarity of an animation.
pub fn animation_log_sim(
    animation_id: &str,
    rep: &CategoryRepresentation,
    w: &AttentionWeights,
    params: &ChoiceParams,
    stimuli: &Stimuli<'_>,
) -> Result<f64> {
    Ok(log_mean_exp(&frame_log_sims(animation_id, rep, w, params, stimuli)?))
}

/// Unclamped probability that the trial's familiar animation is chosen.
pub fn trial_probability(
    trial: &TrialRecord,
    rep: &CategoryRepresentation,
    w: &AttentionWeights,
    params: &ChoiceParams,
    aggregation: Aggregation,
    stimuli: &Stimuli<'_>,
) -> Result<f64> {
    match aggregation {
        Aggregation::SimMean => {
            let pos = animation_log_sim(&trial.familiar_animation_id, rep, w, params, stimuli)?;
            let neg = animation_log_sim(&trial.novel_animation_id, rep, w, params, stimuli)?;
            choice_probability(pos, neg, params.gamma)
        }
        Aggregation::ProbMean => {
            let pos = frame_log_sims(&trial.familiar_animation_id, rep, w, params, stimuli)?;
            let neg = frame_log_sims(&trial.novel_animation_id, rep, w, params, stimuli)?;
            let mut total = 0.0;
            for &a in &pos {
                for &b in &neg {
                    total += choice_probability(a, b, params.gamma)?;
                }
            }
            Ok(total / (pos.len() * neg.len()) as f64)
        }
    }
}

/// Clamped choice probability and Bernoulli log-likelihood of the observed
/// outcome.
#[allow(clippy::too_many_arguments)]
pub fn trial_log_likelihood(
    trial: &TrialRecord,
    rep: &CategoryRepresentation,
    w: &AttentionWeights,
    params: &ChoiceParams,
    aggregation: Aggregation,
    clamp_eps: f64,
    stimuli: &Stimuli<'_>,
) -> Result<(f64, f64)> {
    if !(clamp_eps > 0.0 && clamp_eps < 0.5) {
        return Err(Error::Config(format!("clamp_eps must be in (0, 0.5), got {clamp_eps}")));
    }
    let p = trial_probability(trial, rep, w, params, aggregation, stimuli)?.clamp(clamp_eps, 1.0 - clamp_eps);
    Ok((p, bernoulli_ll(p, trial.correct)))
}

pub(crate) fn bernoulli_ll(p: f64, correct: bool) -> f64 {
    if correct {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}
