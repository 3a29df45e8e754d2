//! Seeded synthetic fixtures with the same schema as real data: a stimulus
//! set of smoothly rotating objects, features for it, and behavior sampled
//! from a known model.

use crate::data::{FeatureStore, Stimuli, StimulusCatalog, StimulusRecord, TrialRecord, TrialTable};
use crate::error::Result;
use crate::fit::RawParams;
use crate::rng::{stream, PortableRng};
use crate::similarity::{trial_probability, Aggregation, CategoryRepresentation};

#[derive(Clone, Debug, PartialEq)]
pub struct WorldConfig {
    pub objects: usize,
    pub animations_per_object: usize,
    pub frames_per_animation: usize,
    pub dim: usize,
    /// Spread of the per-object mean feature vectors.
    pub object_scale: f64,
    /// Amplitude of viewpoint-driven feature variation.
    pub viewpoint_scale: f64,
    /// Independent per-frame jitter.
    pub frame_noise: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            objects: 2,
            animations_per_object: 12,
            frames_per_animation: 26,
            dim: 16,
            object_scale: 0.6,
            viewpoint_scale: 1.0,
            frame_noise: 0.05,
            seed: 1,
        }
    }
}

pub fn object_id(o: usize) -> String {
    ((b'A' + o as u8) as char).to_string()
}

pub fn animation_id(o: usize, a: usize) -> String {
    format!("{}{a:02}", object_id(o))
}

/// Catalog and features for `objects x animations x frames` stimuli.
///
/// Animation `a` covers viewpoints `[60a, 60a + 60)` degrees; each feature
/// dimension is the object's mean plus a sinusoid of the viewpoint, so
/// nearby viewpoints of one object have nearby features.
pub fn synth_world(cfg: &WorldConfig) -> Result<(StimulusCatalog, FeatureStore)> {
    let mut rng = PortableRng::new(cfg.seed, stream::SYNTH);
    let d = cfg.dim;
    let freq: Vec<f64> = (0..d).map(|_| 0.5 + rng.below(3) as f64 * 0.5).collect();
    let amp: Vec<f64> = (0..d).map(|_| cfg.viewpoint_scale * (0.25 + rng.uniform())).collect();
    let mut records = Vec::new();
    let mut store = FeatureStore::new(d);
    let step = 60.0 / (cfg.frames_per_animation.max(2) - 1) as f64;
    for o in 0..cfg.objects {
        let mean: Vec<f64> = (0..d).map(|_| cfg.object_scale * rng.normal()).collect();
        let phase: Vec<f64> = (0..d).map(|_| std::f64::consts::TAU * rng.uniform()).collect();
        for a in 0..cfg.animations_per_object {
            let start = 60.0 * a as f64;
            for f in 0..cfg.frames_per_animation {
                let theta = (start + step * f as f64).to_radians();
                let v: Vec<f32> = (0..d)
                    .map(|i| {
                        (mean[i] + amp[i] * (freq[i] * theta + phase[i]).sin() + cfg.frame_noise * rng.normal()) as f32
                    })
                    .collect();
                let id = format!("{}_f{f:02}", animation_id(o, a));
                store.insert(id.clone(), &v)?;
                records.push(StimulusRecord {
                    stimulus_id: id,
                    object_id: object_id(o),
                    animation_id: animation_id(o, a),
                    frame_index: f as u32,
                    viewpoint_start_deg: Some(start),
                });
            }
        }
    }
    let catalog = StimulusCatalog::new(cfg.frames_per_animation as u32, records)?;
    Ok((catalog, store))
}

/// Catalog whose stimuli all share one feature vector.
pub fn constant_world(cfg: &WorldConfig) -> Result<(StimulusCatalog, FeatureStore)> {
    let (catalog, varied) = synth_world(cfg)?;
    let value: Vec<f32> = (0..cfg.dim).map(|i| 0.1 * i as f32).collect();
    let mut store = FeatureStore::new(varied.dim());
    for id in varied.ids() {
        store.insert(id.clone(), &value)?;
    }
    Ok((catalog, store))
}

/// Exemplar parameters for generating behavior: moderately peaked
/// attention around `sigma = exp(-0.5)`, with `gamma = exp(-0.8)` and
/// `beta = exp(-0.5)`, which keeps per-condition accuracy well inside (0.5, 1).
pub fn exemplar_truth(dim: usize, seed: u64) -> RawParams {
    let mut rng = PortableRng::new(seed, stream::SYNTH);
    RawParams {
        s: (0..dim).map(|_| 0.5 * rng.normal() - 0.5).collect(),
        g: -0.8,
        b: Some(-0.5),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BehaviorConfig {
    pub subjects: usize,
    pub conditions: usize,
    pub trials_per_condition: usize,
    pub seed: u64,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        Self {
            subjects: 35,
            conditions: 12,
            trials_per_condition: 20,
            seed: 2,
        }
    }
}

/// Test design shared by the generators: subject `s` is imprinted on
/// animation 0 of object `s % 2`; condition `j` pairs that object's
/// animation `j` with the other object's animation `j`.
pub fn design(cfg: &BehaviorConfig) -> Vec<TrialRecord> {
    let mut out = Vec::with_capacity(cfg.subjects * cfg.conditions * cfg.trials_per_condition);
    for s in 0..cfg.subjects {
        let own = s % 2;
        let other = 1 - own;
        for j in 0..cfg.conditions {
            for _ in 0..cfg.trials_per_condition {
                out.push(TrialRecord {
                    subject_id: format!("chick{s:03}"),
                    imprint_animation_id: animation_id(own, 0),
                    condition_id: format!("vp{j:02}"),
                    familiar_animation_id: animation_id(own, j),
                    novel_animation_id: animation_id(other, j),
                    correct: false,
                });
            }
        }
    }
    out
}

/// Behavior sampled from a known model. Returns the trial table and each
/// trial's true (unclamped) probability of a correct choice.
pub fn synth_behavior(
    stimuli: &Stimuli<'_>,
    truth: &RawParams,
    aggregation: Aggregation,
    cfg: &BehaviorConfig,
) -> Result<(TrialTable, Vec<f64>)> {
    let (w, params) = truth.transform()?;
    let mut rng = PortableRng::new(cfg.seed, stream::SYNTH);
    let mut trials = design(cfg);
    let mut probs = Vec::with_capacity(trials.len());
    let mut cache: std::collections::BTreeMap<(String, String, String), f64> = Default::default();
    for t in &mut trials {
        let key = (
            t.imprint_animation_id.clone(),
            t.familiar_animation_id.clone(),
            t.novel_animation_id.clone(),
        );
        let p = match cache.get(&key) {
            Some(&p) => p,
            None => {
                let rep = CategoryRepresentation::from_animation(truth.kind(), &t.imprint_animation_id, stimuli)?;
                let p = trial_probability(t, &rep, &w, &params, aggregation, stimuli)?;
                cache.insert(key, p);
                p
            }
        };
        t.correct = rng.bernoulli(p);
        probs.push(p);
    }
    Ok((TrialTable::new(trials), probs))
}

/// Behavior with a fixed true accuracy per condition, for reliability
/// checks.
pub fn accuracy_table(accuracies: &[f64], subjects: usize, trials_per_condition: usize, seed: u64) -> TrialTable {
    let cfg = BehaviorConfig {
        subjects,
        conditions: accuracies.len(),
        trials_per_condition,
        seed,
    };
    let mut rng = PortableRng::new(seed, stream::SYNTH);
    let mut trials = design(&cfg);
    for (i, t) in trials.iter_mut().enumerate() {
        let j = (i / trials_per_condition) % accuracies.len();
        t.correct = rng.bernoulli(accuracies[j]);
    }
    TrialTable::new(trials)
}
