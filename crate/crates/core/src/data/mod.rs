//! Stimulus catalog, feature store and trial table ingestion, plus fold
//! assignment over test conditions.

mod catalog;
mod features;
mod folds;
mod trials;

pub use catalog::{load_catalog, write_catalog, Animation, StimulusCatalog, StimulusRecord};
pub use features::{load_features, write_features, FeatureFormat, FeatureStore, BINARY_MAGIC};
pub use folds::{assign_folds, FoldAssignment, DEFAULT_FOLDS};
pub use trials::{load_trials, read_trials, write_trials, TrialRecord, TrialTable, TRIALS_HEADER};

use crate::error::{Error, Result};

/// Frame features of one imprinting animation.
#[derive(Clone, Debug, PartialEq)]
pub struct ImprintingSet {
    pub object_id: String,
    pub animation_id: String,
    pub stimulus_ids: Vec<String>,
}

/// Catalog and features bundled together, the inputs every model needs.
#[derive(Clone, Copy, Debug)]
pub struct Stimuli<'a> {
    pub catalog: &'a StimulusCatalog,
    pub features: &'a FeatureStore,
}

impl<'a> Stimuli<'a> {
    pub fn new(catalog: &'a StimulusCatalog, features: &'a FeatureStore) -> Self {
        Self { catalog, features }
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    pub fn imprinting_set(&self, animation_id: &str) -> Result<ImprintingSet> {
        let animation = self.catalog.animation(animation_id)?;
        if animation.frames.is_empty() {
            return Err(Error::Empty("imprinting animation has no frames"));
        }
        for id in &animation.frames {
            if self.features.get(id).is_none() {
                return Err(Error::MissingFeatures(id.clone()));
            }
        }
        Ok(ImprintingSet {
            object_id: animation.object_id.clone(),
            animation_id: animation_id.to_owned(),
            stimulus_ids: animation.frames.clone(),
        })
    }

    /// Frame vectors of an animation, widened to `f64`.
    pub fn frames(&self, animation_id: &str) -> Result<Vec<Vec<f64>>> {
        let animation = self.catalog.animation(animation_id)?;
        animation
            .frames
            .iter()
            .map(|id| {
                self.features
                    .get(id)
                    .map(|v| v.iter().map(|&x| f64::from(x)).collect())
                    .ok_or_else(|| Error::MissingFeatures(id.clone()))
            })
            .collect()
    }
}
