use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::catalog::StimulusCatalog;
use crate::error::{Error, Result};

pub const TRIALS_HEADER: [&str; 6] = [
    "subject_id",
    "imprint_animation_id",
    "condition_id",
    "familiar_animation_id",
    "novel_animation_id",
    "correct",
];

/// One scored two-alternative test trial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialRecord {
    pub subject_id: String,
    pub imprint_animation_id: String,
    pub condition_id: String,
    pub familiar_animation_id: String,
    pub novel_animation_id: String,
    pub correct: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrialTable {
    records: Vec<TrialRecord>,
}

#[derive(Deserialize)]
struct RawTrial {
    subject_id: String,
    imprint_animation_id: String,
    condition_id: String,
    familiar_animation_id: String,
    novel_animation_id: String,
    correct: String,
}

impl TrialTable {
    pub fn new(records: Vec<TrialRecord>) -> Self {
        Self { records }
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn conditions(&self) -> BTreeSet<&str> {
        self.records.iter().map(|t| t.condition_id.as_str()).collect()
    }

    pub fn subjects(&self) -> BTreeSet<&str> {
        self.records.iter().map(|t| t.subject_id.as_str()).collect()
    }

    /// Checks the cross-object constraint for every trial.
    pub fn validate(&self, catalog: &StimulusCatalog) -> Result<()> {
        for (i, t) in self.records.iter().enumerate() {
            validate_trial(t, catalog).map_err(|e| match e {
                Error::Validation(msg) => Error::Validation(format!("trial {i}: {msg}")),
                other => other,
            })?;
        }
        Ok(())
    }

    /// SHA-256 over the canonical CSV encoding, used to tell whether two
    /// reports were fit to the same data.
    pub fn digest(&self) -> String {
        let bytes = self.to_csv_bytes();
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(TRIALS_HEADER).expect("in-memory write");
        for t in &self.records {
            w.write_record([
                t.subject_id.as_str(),
                &t.imprint_animation_id,
                &t.condition_id,
                &t.familiar_animation_id,
                &t.novel_animation_id,
                if t.correct { "1" } else { "0" },
            ])
            .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

fn validate_trial(t: &TrialRecord, catalog: &StimulusCatalog) -> Result<()> {
    if t.condition_id.is_empty() {
        return Err(Error::Validation("empty condition_id".into()));
    }
    let imprint = catalog.object_of(&t.imprint_animation_id)?;
    let familiar = catalog.object_of(&t.familiar_animation_id)?;
    let novel = catalog.object_of(&t.novel_animation_id)?;
    if familiar == novel {
        return Err(Error::Validation(format!(
            "familiar '{}' and novel '{}' animations share object '{familiar}'",
            t.familiar_animation_id, t.novel_animation_id
        )));
    }
    if familiar != imprint {
        return Err(Error::Validation(format!(
            "familiar animation '{}' shows object '{familiar}' but subject '{}' was imprinted on '{imprint}'",
            t.familiar_animation_id, t.subject_id
        )));
    }
    Ok(())
}

/// Parses a trials CSV without consulting a catalog.
pub fn read_trials(path: impl AsRef<Path>) -> Result<TrialTable> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_trials(&bytes, path)
}

/// Parses a trials CSV and validates every trial against the catalog.
pub fn load_trials(path: impl AsRef<Path>, catalog: &StimulusCatalog) -> Result<TrialTable> {
    let path = path.as_ref();
    let table = read_trials(path)?;
    for (i, t) in table.records.iter().enumerate() {
        // Header is line 1.
        validate_trial(t, catalog).map_err(|e| Error::parse(path, Some(i as u64 + 2), e.to_string()))?;
    }
    Ok(table)
}

fn parse_trials(bytes: &[u8], path: &Path) -> Result<TrialTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| Error::parse(path, Some(1), e.to_string()))?;
    if header.iter().ne(TRIALS_HEADER) {
        return Err(Error::parse(
            path,
            Some(1),
            format!("expected header '{}'", TRIALS_HEADER.join(",")),
        ));
    }
    let mut records = Vec::new();
    for row in reader.deserialize::<RawTrial>() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line());
            Error::parse(path, line, e.to_string())
        })?;
        let line = Some(records.len() as u64 + 2);
        let correct = match row.correct.trim() {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::parse(
                    path,
                    line,
                    format!("correct must be 0 or 1, found '{other}'"),
                ))
            }
        };
        if row.condition_id.is_empty() {
            return Err(Error::parse(path, line, "empty condition_id"));
        }
        records.push(TrialRecord {
            subject_id: row.subject_id,
            imprint_animation_id: row.imprint_animation_id,
            condition_id: row.condition_id,
            familiar_animation_id: row.familiar_animation_id,
            novel_animation_id: row.novel_animation_id,
            correct,
        });
    }
    if records.is_empty() {
        log::warn!("{}: trial table is empty", path.display());
    }
    Ok(TrialTable { records })
}

pub fn write_trials(table: &TrialTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, table.to_csv_bytes()).map_err(|e| Error::io(path, e))
}
