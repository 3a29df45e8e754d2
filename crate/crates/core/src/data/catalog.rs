use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One stimulus image: a single frame of one viewpoint-range animation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StimulusRecord {
    pub stimulus_id: String,
    pub object_id: String,
    pub animation_id: String,
    pub frame_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewpoint_start_deg: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct CatalogFile {
    frames_per_animation: u32,
    stimuli: Vec<StimulusRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Animation {
    pub object_id: String,
    /// Stimulus ids ordered by frame index.
    pub frames: Vec<String>,
}

/// Validated stimulus metadata.
///
/// Viewpoint metadata is carried through but never read by the models.
#[derive(Clone, Debug, PartialEq)]
pub struct StimulusCatalog {
    frames_per_animation: u32,
    records: Vec<StimulusRecord>,
    by_id: HashMap<String, usize>,
    animations: BTreeMap<String, Animation>,
}

impl StimulusCatalog {
    pub fn new(frames_per_animation: u32, records: Vec<StimulusRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Validation("empty catalog".into()));
        }
        if frames_per_animation == 0 {
            return Err(Error::Validation("frames_per_animation must be positive".into()));
        }

        let mut by_id = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if r.stimulus_id.is_empty() {
                return Err(Error::Validation(format!("stimulus #{i} has an empty stimulus_id")));
            }
            if by_id.insert(r.stimulus_id.clone(), i).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate stimulus_id '{}'",
                    r.stimulus_id
                )));
            }
        }

        // animation -> (object, [(frame_index, stimulus_id)])
        type Frames<'a> = BTreeMap<&'a str, (&'a str, Vec<(u32, &'a str)>)>;
        let mut frames: Frames = BTreeMap::new();
        for r in &records {
            let entry = frames
                .entry(r.animation_id.as_str())
                .or_insert_with(|| (r.object_id.as_str(), Vec::new()));
            if entry.0 != r.object_id {
                return Err(Error::Validation(format!(
                    "animation '{}' maps to objects '{}' and '{}' (stimulus '{}')",
                    r.animation_id, entry.0, r.object_id, r.stimulus_id
                )));
            }
            entry.1.push((r.frame_index, r.stimulus_id.as_str()));
        }

        let mut animations = BTreeMap::new();
        for (animation_id, (object_id, mut list)) in frames {
            list.sort_unstable();
            for (expected, &(frame, id)) in list.iter().enumerate() {
                if frame as usize != expected {
                    return Err(Error::Validation(format!(
                        "animation '{animation_id}': frame indices are not contiguous from 0 (stimulus '{id}' has frame {frame}, expected {expected})"
                    )));
                }
            }
            if list.len() != frames_per_animation as usize {
                return Err(Error::Validation(format!(
                    "animation '{animation_id}' has {} frames, expected {frames_per_animation}",
                    list.len()
                )));
            }
            animations.insert(
                animation_id.to_owned(),
                Animation {
                    object_id: object_id.to_owned(),
                    frames: list.into_iter().map(|(_, id)| id.to_owned()).collect(),
                },
            );
        }

        Ok(Self {
            frames_per_animation,
            records,
            by_id,
            animations,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: CatalogFile = serde_json::from_str(text)
            .map_err(|e| Error::parse("<catalog>", Some(e.line() as u64), e.to_string()))?;
        Self::new(file.frames_per_animation, file.stimuli)
    }

    pub fn to_json_string(&self) -> String {
        let file = CatalogFile {
            frames_per_animation: self.frames_per_animation,
            stimuli: self.records.clone(),
        };
        serde_json::to_string_pretty(&file).expect("catalog serializes")
    }

    pub fn frames_per_animation(&self) -> u32 {
        self.frames_per_animation
    }

    pub fn records(&self) -> &[StimulusRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, stimulus_id: &str) -> Option<&StimulusRecord> {
        self.by_id.get(stimulus_id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, stimulus_id: &str) -> bool {
        self.by_id.contains_key(stimulus_id)
    }

    pub fn animations(&self) -> &BTreeMap<String, Animation> {
        &self.animations
    }

    pub fn animation(&self, animation_id: &str) -> Result<&Animation> {
        self.animations
            .get(animation_id)
            .ok_or_else(|| Error::UnknownAnimation(animation_id.to_owned()))
    }

    pub fn object_of(&self, animation_id: &str) -> Result<&str> {
        self.animation(animation_id).map(|a| a.object_id.as_str())
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<StimulusCatalog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CatalogFile = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, Some(e.line() as u64), e.to_string()))?;
    StimulusCatalog::new(file.frames_per_animation, file.stimuli)
}

pub fn write_catalog(catalog: &StimulusCatalog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, catalog.to_json_string() + "\n").map_err(|e| Error::io(path, e))
}
