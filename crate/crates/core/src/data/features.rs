use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use crate::data::catalog::StimulusCatalog;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 8] = b"FEAT0001";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureFormat {
    Csv,
    Binary,
}

impl std::str::FromStr for FeatureFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "binary" | "bin" => Ok(Self::Binary),
            other => Err(Error::Config(format!("unknown feature format '{other}'"))),
        }
    }
}

/// Per-stimulus feature vectors of a common dimension, stored as `f32` so
/// the binary format round-trips bit-exactly.
///
/// Equality compares the id → vector mapping and ignores row order.
#[derive(Clone, Debug)]
pub struct FeatureStore {
    dim: usize,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<f32>,
}

impl PartialEq for FeatureStore {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.ids.len() == other.ids.len()
            && self
                .ids
                .iter()
                .all(|id| other.get(id).is_some_and(|v| v == self.get(id).unwrap()))
    }
}

impl FeatureStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ids: Vec::new(),
            index: HashMap::new(),
            values: Vec::new(),
        }
    }

    /// Appends a vector. Rejects duplicates, wrong lengths and non-finite
    /// entries.
    pub fn insert(&mut self, stimulus_id: impl Into<String>, vector: &[f32]) -> Result<()> {
        let stimulus_id = stimulus_id.into();
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if let Some(i) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "stimulus '{stimulus_id}' column {i} is {}",
                vector[i]
            )));
        }
        if self.index.contains_key(&stimulus_id) {
            return Err(Error::Validation(format!(
                "duplicate feature row for '{stimulus_id}'"
            )));
        }
        self.index.insert(stimulus_id.clone(), self.ids.len());
        self.ids.push(stimulus_id);
        self.values.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, stimulus_id: &str) -> Option<&[f32]> {
        self.index
            .get(stimulus_id)
            .map(|&i| &self.values[i * self.dim..(i + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids.iter().map(|id| (id.as_str(), self.get(id).unwrap()))
    }

    /// Checks that the store covers exactly the catalog's stimuli.
    pub fn check_coverage(&self, catalog: &StimulusCatalog) -> Result<()> {
        for record in catalog.records() {
            if !self.index.contains_key(&record.stimulus_id) {
                return Err(Error::MissingFeatures(record.stimulus_id.clone()));
            }
        }
        if let Some(extra) = self.ids.iter().find(|id| !catalog.contains(id)) {
            return Err(Error::Validation(format!(
                "feature row '{extra}' is not in the catalog"
            )));
        }
        Ok(())
    }
}

/// Reads a feature file, sniffing the binary magic, and checks it against
/// the catalog.
pub fn load_features(path: impl AsRef<Path>, catalog: &StimulusCatalog) -> Result<FeatureStore> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let store = if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(&bytes, path)?
    } else {
        decode_csv(&bytes, path)?
    };
    if store.dim == 0 {
        return Err(Error::Validation("zero-dimensional features rejected".into()));
    }
    store.check_coverage(catalog)?;
    Ok(store)
}

pub fn write_features(store: &FeatureStore, path: impl AsRef<Path>, format: FeatureFormat) -> Result<()> {
    let path = path.as_ref();
    if store.dim == 0 {
        return Err(Error::Validation("zero-dimensional features rejected".into()));
    }
    let bytes = match format {
        FeatureFormat::Csv => encode_csv(store),
        FeatureFormat::Binary => encode_binary(store)?,
    };
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

fn encode_csv(store: &FeatureStore) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = Vec::with_capacity(store.dim + 1);
    header.push("stimulus_id".to_owned());
    header.extend((0..store.dim).map(|i| format!("f{i}")));
    writer.write_record(&header).expect("in-memory write");
    let mut row = Vec::with_capacity(store.dim + 1);
    for (id, vector) in store.iter() {
        row.clear();
        row.push(id.to_owned());
        // Display prints the shortest decimal that parses back to the same f32.
        row.extend(vector.iter().map(|v| v.to_string()));
        writer.write_record(&row).expect("in-memory write");
    }
    writer.into_inner().expect("in-memory flush")
}

fn decode_csv(bytes: &[u8], path: &Path) -> Result<FeatureStore> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| Error::parse(path, Some(1), e.to_string()))?
        .clone();
    if header.get(0) != Some("stimulus_id") {
        return Err(Error::parse(path, Some(1), "first column must be 'stimulus_id'"));
    }
    for (i, name) in header.iter().skip(1).enumerate() {
        if name != format!("f{i}") {
            return Err(Error::parse(
                path,
                Some(1),
                format!("column {} should be 'f{i}', found '{name}'", i + 1),
            ));
        }
    }
    let dim = header.len() - 1;
    let mut store = FeatureStore::new(dim);
    let mut vector = Vec::with_capacity(dim);
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line());
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line());
        if record.len() != dim + 1 {
            return Err(Error::parse(
                path,
                line,
                format!("ragged row: {} values, expected {dim}", record.len().saturating_sub(1)),
            ));
        }
        vector.clear();
        for (i, field) in record.iter().skip(1).enumerate() {
            let v: f32 = field
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line, format!("column f{i}: invalid number '{field}'")))?;
            if !v.is_finite() {
                return Err(Error::parse(path, line, format!("column f{i}: non-finite value '{field}'")));
            }
            vector.push(v);
        }
        store
            .insert(&record[0], &vector)
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
    }
    Ok(store)
}

fn encode_binary(store: &FeatureStore) -> Result<Vec<u8>> {
    let count = u32::try_from(store.len()).map_err(|_| Error::Validation("too many records".into()))?;
    let dim = u32::try_from(store.dim).map_err(|_| Error::Validation("dimension too large".into()))?;
    let mut out = Vec::with_capacity(16 + store.len() * (8 + 4 * store.dim));
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for (id, vector) in store.iter() {
        let len = u16::try_from(id.len())
            .map_err(|_| Error::Validation(format!("stimulus id longer than 65535 bytes: '{id}'")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        for v in vector {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn decode_binary(bytes: &[u8], path: &Path) -> Result<FeatureStore> {
    struct Cursor<'a> {
        bytes: &'a [u8],
        pos: usize,
    }
    impl<'a> Cursor<'a> {
        fn take(&mut self, n: usize) -> Option<&'a [u8]> {
            let out = self.bytes.get(self.pos..self.pos.checked_add(n)?)?;
            self.pos += n;
            Some(out)
        }
    }

    let truncated = |what: &str, record: Option<usize>| {
        let at = record.map(|r| format!(" in record {r}")).unwrap_or_default();
        Error::parse(path, None, format!("truncated binary file: missing {what}{at}"))
    };
    let mut cur = Cursor { bytes, pos: BINARY_MAGIC.len() };
    let count = u32::from_le_bytes(cur.take(4).ok_or_else(|| truncated("record count", None))?.try_into().unwrap());
    let dim = u32::from_le_bytes(cur.take(4).ok_or_else(|| truncated("dimension", None))?.try_into().unwrap()) as usize;
    let mut store = FeatureStore::new(dim);
    let mut vector = vec![0f32; dim];
    for r in 0..count as usize {
        let len = u16::from_le_bytes(cur.take(2).ok_or_else(|| truncated("id length", Some(r)))?.try_into().unwrap());
        let id = std::str::from_utf8(cur.take(len as usize).ok_or_else(|| truncated("id bytes", Some(r)))?)
            .map_err(|_| Error::parse(path, None, format!("record {r}: id is not UTF-8")))?;
        let raw = cur.take(4 * dim).ok_or_else(|| truncated("feature values", Some(r)))?;
        for (v, chunk) in vector.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        store
            .insert(id, &vector)
            .map_err(|e| Error::parse(path, None, format!("record {r}: {e}")))?;
    }
    if cur.pos != bytes.len() {
        return Err(Error::parse(
            path,
            None,
            format!("{} trailing bytes after {count} records", bytes.len() - cur.pos),
        ));
    }
    Ok(store)
}
