use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{read_png, Image};

pub const BENIGN: u8 = 0;
pub const MALIGNANT: u8 = 1;

pub fn class_name(label: u8) -> &'static str {
    match label {
        BENIGN => "benign-analog",
        MALIGNANT => "malignant-analog",
        _ => "unknown",
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Real,
    Synthetic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceIds {
    pub content_id: String,
    pub style_id: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    /// Relative to the manifest root.
    pub path: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pseudo_label: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<SourceIds>,
}

impl ManifestRecord {
    pub fn real(id: impl Into<String>, path: impl Into<String>, label: u8) -> Self {
        ManifestRecord {
            id: id.into(),
            path: path.into(),
            source: Source::Real,
            label: Some(label),
            pseudo_label: None,
            score: None,
            provenance: None,
        }
    }

    pub fn synthetic(id: impl Into<String>, path: impl Into<String>, provenance: SourceIds) -> Self {
        ManifestRecord {
            id: id.into(),
            path: path.into(),
            source: Source::Synthetic,
            label: None,
            pseudo_label: None,
            score: None,
            provenance: Some(provenance),
        }
    }

    pub fn is_real(&self) -> bool {
        self.source == Source::Real
    }

    /// Ground-truth label for real records, pseudo-label for synthetic ones.
    pub fn training_label(&self) -> Option<u8> {
        match self.source {
            Source::Real => self.label,
            Source::Synthetic => self.pseudo_label,
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidArgument(format!("record `{}`: {why}", self.id)));
        if self.id.is_empty() {
            return bad("empty id");
        }
        match self.source {
            Source::Real => {
                if !matches!(self.label, Some(BENIGN | MALIGNANT)) {
                    return bad("real records need a label of 0 or 1");
                }
                if self.provenance.is_some() || self.pseudo_label.is_some() {
                    return bad("real records carry no provenance or pseudo-label");
                }
            }
            Source::Synthetic => {
                if self.provenance.is_none() {
                    return bad("synthetic records need provenance");
                }
                if self.label.is_some() {
                    return bad("synthetic records have no ground-truth label");
                }
                if matches!(self.pseudo_label, Some(l) if l > 1) {
                    return bad("pseudo-label must be 0 or 1");
                }
            }
        }
        Ok(())
    }
}

/// Ordered image records plus the directory their paths are relative to.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    records: Vec<ManifestRecord>,
    index: HashMap<String, usize>,
}

impl DatasetManifest {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DatasetManifest { root: root.into(), records: Vec::new(), index: HashMap::new() }
    }

    pub fn from_records(root: impl Into<PathBuf>, records: Vec<ManifestRecord>) -> Result<Self> {
        let mut m = DatasetManifest::new(root);
        for r in records {
            m.push(r)?;
        }
        Ok(m)
    }

    pub fn push(&mut self, record: ManifestRecord) -> Result<()> {
        record.check()?;
        if self.index.contains_key(&record.id) {
            return Err(Error::InvalidArgument(format!("duplicate manifest id `{}`", record.id)));
        }
        self.index.insert(record.id.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[ManifestRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ManifestRecord> {
        self.index.get(id).map(|&i| &self.records[i])
    }

    pub fn reals(&self) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(|r| r.is_real())
    }

    pub fn synthetics(&self) -> impl Iterator<Item = &ManifestRecord> {
        self.records.iter().filter(|r| !r.is_real())
    }

    /// Ids of real records with the given label, in manifest order.
    pub fn real_ids(&self, label: u8) -> Vec<String> {
        self.reals().filter(|r| r.label == Some(label)).map(|r| r.id.clone()).collect()
    }

    /// Sets pseudo-label and score on a synthetic record. Real records are
    /// immutable.
    pub fn set_pseudo_label(&mut self, id: &str, label: u8, score: f64) -> Result<()> {
        let i = *self.index.get(id).ok_or_else(|| Error::InvalidArgument(format!("unknown id `{id}`")))?;
        let rec = &mut self.records[i];
        if rec.is_real() {
            return Err(Error::InvalidArgument(format!("`{id}` is a real image; its label is fixed")));
        }
        if label > 1 {
            return Err(Error::InvalidArgument(format!("pseudo-label {label} is not 0 or 1")));
        }
        rec.pseudo_label = Some(label);
        rec.score = Some(score);
        Ok(())
    }

    /// Keeps the records for which `keep` is true.
    pub fn filtered(&self, mut keep: impl FnMut(&ManifestRecord) -> bool) -> DatasetManifest {
        let records = self.records.iter().filter(|r| keep(r)).cloned().collect();
        DatasetManifest::from_records(self.root.clone(), records).expect("subset of a valid manifest")
    }

    pub fn path_of(&self, record: &ManifestRecord) -> PathBuf {
        self.root.join(&record.path)
    }

    pub fn load_image(&self, id: &str) -> Result<Image> {
        let rec = self.get(id).ok_or_else(|| Error::InvalidArgument(format!("unknown id `{id}`")))?;
        read_png(&self.path_of(rec))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serialises"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(root: impl Into<PathBuf>, text: &str) -> Result<Self> {
        let mut m = DatasetManifest::new(root);
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ManifestRecord = serde_json::from_str(line)
                .map_err(|e| Error::InvalidArgument(format!("manifest line {}: {e}", n + 1)))?;
            m.push(rec)?;
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    /// Reads a `.jsonl` manifest; record paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read manifest {}: {e}", path.display())))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        DatasetManifest::from_jsonl(root, &text)
    }
}
