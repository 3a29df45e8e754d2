//! Committed synthetic fixtures shared by the integration tests.
//!
//! Everything under `tests/fixtures` is produced by [`write_all`] from the
//! seeded generators; `fixtures.rs` checks that regenerating gives the same
//! bytes. Set `PECKFIT_BLESS=1` to rewrite them after an intentional change.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use peckfit::data::{
    load_catalog, load_features, load_trials, write_catalog, write_features, FeatureFormat, FeatureStore,
    StimulusCatalog, TrialTable,
};
use peckfit::fit::RawParams;
use peckfit::synth::{
    accuracy_table, constant_world, exemplar_truth, synth_behavior, synth_world, BehaviorConfig, WorldConfig,
};
use peckfit::Aggregation;

pub const TRUTH_SEED: u64 = 9;
pub const CEILING_SUBJECTS: usize = 200;
pub const CEILING_TRIALS_PER_CONDITION: usize = 5;
pub const CEILING_SEED: u64 = 4;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixture_dir().join(name)
}

/// Twelve true accuracies evenly spaced over [0.5, 0.95].
pub fn ceiling_accuracies() -> Vec<f64> {
    (0..12).map(|j| 0.5 + 0.45 * j as f64 / 11.0).collect()
}

/// Writes every fixture file into `dir`.
pub fn write_all(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    let (catalog, store) = synth_world(&WorldConfig::default()).unwrap();
    write_catalog(&catalog, dir.join("catalog.json")).unwrap();
    write_features(&store, dir.join("features.bin"), FeatureFormat::Binary).unwrap();
    write_features(&store, dir.join("features.csv"), FeatureFormat::Csv).unwrap();

    let (_, constant) = constant_world(&WorldConfig::default()).unwrap();
    write_features(&constant, dir.join("features_constant.csv"), FeatureFormat::Csv).unwrap();

    let truth = exemplar_truth(store.dim(), TRUTH_SEED);
    std::fs::write(dir.join("truth.json"), serde_json::to_string_pretty(&truth).unwrap() + "\n").unwrap();
    let stimuli = peckfit::data::Stimuli::new(&catalog, &store);
    let (trials, _) = synth_behavior(&stimuli, &truth, Aggregation::SimMean, &BehaviorConfig::default()).unwrap();
    peckfit::data::write_trials(&trials, dir.join("trials.csv")).unwrap();

    let ceiling = accuracy_table(
        &ceiling_accuracies(),
        CEILING_SUBJECTS,
        CEILING_TRIALS_PER_CONDITION,
        CEILING_SEED,
    );
    peckfit::data::write_trials(&ceiling, dir.join("ceiling_trials.csv")).unwrap();
}

pub struct World {
    pub catalog: StimulusCatalog,
    pub features: FeatureStore,
}

pub fn world() -> World {
    let catalog = load_catalog(fixture("catalog.json")).unwrap();
    let features = load_features(fixture("features.bin"), &catalog).unwrap();
    World { catalog, features }
}

pub fn constant_features(catalog: &StimulusCatalog) -> FeatureStore {
    load_features(fixture("features_constant.csv"), catalog).unwrap()
}

pub fn truth() -> RawParams {
    serde_json::from_str(&std::fs::read_to_string(fixture("truth.json")).unwrap()).unwrap()
}

pub fn behavior(catalog: &StimulusCatalog) -> TrialTable {
    load_trials(fixture("trials.csv"), catalog).unwrap()
}

pub fn ceiling_trials(catalog: &StimulusCatalog) -> TrialTable {
    load_trials(fixture("ceiling_trials.csv"), catalog).unwrap()
}

/// A small random problem for gradient and oracle checks.
pub struct Instance {
    pub catalog: StimulusCatalog,
    pub features: FeatureStore,
    pub trials: Vec<peckfit::data::TrialRecord>,
    pub params: RawParams,
    pub kind: peckfit::ModelKind,
    pub aggregation: Aggregation,
}

/// Instance `i` cycles through both model kinds and both aggregations, with
/// `dim <= 8` and at most five frames (exemplars) per animation. Objects are
/// kept close enough that choice probabilities stay away from 0 and 1,
/// where finite differences of `ln(1 - p)` lose most of their digits.
pub fn random_instance(i: u64) -> Instance {
    use peckfit::rng::PortableRng;
    use peckfit::synth::design;
    use peckfit::ModelKind;

    let mut rng = PortableRng::new(1000 + i, 77);
    let kind = if i.is_multiple_of(2) { ModelKind::Exemplar } else { ModelKind::Prototype };
    let aggregation = if (i / 2).is_multiple_of(2) { Aggregation::SimMean } else { Aggregation::ProbMean };
    let world = WorldConfig {
        animations_per_object: 3,
        frames_per_animation: 1 + rng.below(5) as usize,
        dim: 1 + rng.below(8) as usize,
        object_scale: 0.1 + 0.4 * rng.uniform(),
        frame_noise: 0.1,
        seed: 500 + i,
        ..WorldConfig::default()
    };
    let (catalog, features) = synth_world(&world).unwrap();
    let mut trials = design(&BehaviorConfig {
        subjects: 2,
        conditions: 3,
        trials_per_condition: 2,
        seed: 0,
    });
    for t in &mut trials {
        t.correct = rng.bernoulli(0.6);
    }
    let params = RawParams {
        s: (0..world.dim).map(|_| 0.5 * rng.normal() - 0.3).collect(),
        g: 0.5 * rng.normal() - 0.5,
        b: (kind == ModelKind::Exemplar).then(|| 0.5 * rng.normal()),
    };
    Instance {
        catalog,
        features,
        trials,
        params,
        kind,
        aggregation,
    }
}

/// Central finite differences of `f` at `x`.
pub fn finite_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest gradient disagreement relative to the larger magnitude, with
/// `floor` bounding the denominator for components near zero.
pub fn gradient_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
