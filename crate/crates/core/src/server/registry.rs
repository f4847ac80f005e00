//! Tag to location registry and its TSV persistence.
//!
//! One record per line, tab separated:
//!
//! ```text
//! tag_hex  name  description  [image_ref  [topic=text ...]]
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. An empty
//! `image_ref` field means "no image".

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tag::{parse_tag_id, TagId};

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate tag {0}")]
    DuplicateTag(TagId),
    #[error("field {field:?} of tag {tag} contains a tab or newline")]
    InvalidField { tag: TagId, field: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationRecord {
    pub tag: TagId,
    pub name: String,
    pub description: String,
    #[serde(rename = "image")]
    pub image_ref: Option<String>,
    pub extras: BTreeMap<String, String>,
}

impl LocationRecord {
    pub fn new(tag: TagId, name: impl Into<String>, description: impl Into<String>) -> Self {
        LocationRecord {
            tag,
            name: name.into(),
            description: description.into(),
            image_ref: None,
            extras: BTreeMap::new(),
        }
    }

    pub fn with_image(mut self, image: impl Into<String>) -> Self {
        self.image_ref = Some(image.into());
        self
    }

    pub fn with_extra(mut self, topic: impl Into<String>, text: impl Into<String>) -> Self {
        self.extras.insert(topic.into(), text.into());
        self
    }

    fn validate(&self) -> Result<(), RegistryError> {
        let bad = |s: &str| s.contains(['\t', '\n', '\r']);
        let invalid = |field| RegistryError::InvalidField {
            tag: self.tag,
            field,
        };
        if self.name.is_empty() || bad(&self.name) {
            return Err(invalid("name"));
        }
        if bad(&self.description) {
            return Err(invalid("description"));
        }
        if self
            .image_ref
            .as_deref()
            .is_some_and(|s| s.is_empty() || bad(s))
        {
            return Err(invalid("image"));
        }
        for (topic, text) in &self.extras {
            if topic.is_empty() || topic.contains('=') || bad(topic) || bad(text) {
                return Err(invalid("extras"));
            }
        }
        Ok(())
    }

    pub fn to_tsv_line(&self) -> String {
        let mut fields = vec![
            self.tag.to_string(),
            self.name.clone(),
            self.description.clone(),
            self.image_ref.clone().unwrap_or_default(),
        ];
        fields.extend(self.extras.iter().map(|(k, v)| format!("{k}={v}")));
        fields.join("\t")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registry {
    records: BTreeMap<TagId, LocationRecord>,
    version: u64,
}

impl Default for Registry {
    fn default() -> Self {
        Registry {
            records: BTreeMap::new(),
            version: 1,
        }
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn with_version(mut self, version: u64) -> Self {
        self.version = version;
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &LocationRecord> {
        self.records.values()
    }

    pub fn insert(&mut self, record: LocationRecord) -> Result<(), RegistryError> {
        record.validate()?;
        if self.records.contains_key(&record.tag) {
            return Err(RegistryError::DuplicateTag(record.tag));
        }
        self.records.insert(record.tag, record);
        Ok(())
    }

    /// Exact-match lookup.
    pub fn resolve(&self, tag: TagId) -> Option<&LocationRecord> {
        self.records.get(&tag)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for record in self.records.values() {
            out.push_str(&record.to_tsv_line());
            out.push('\n');
        }
        out
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<LocationRecord, RegistryError> {
    let err = |reason: String| RegistryError::Parse {
        line: lineno,
        reason,
    };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 3 {
        return Err(err(format!(
            "expected at least 3 fields, found {}",
            fields.len()
        )));
    }
    let tag = parse_tag_id(fields[0]).map_err(|e| err(e.to_string()))?;
    if fields[1].is_empty() {
        return Err(err("empty name".into()));
    }
    let mut record = LocationRecord::new(tag, fields[1], fields[2]);
    if let Some(image) = fields.get(3).filter(|s| !s.is_empty()) {
        record.image_ref = Some((*image).to_string());
    }
    for extra in fields.iter().skip(4) {
        let (topic, text) = extra
            .split_once('=')
            .ok_or_else(|| err(format!("extra {extra:?} is not topic=text")))?;
        if topic.is_empty() {
            return Err(err("empty extra topic".into()));
        }
        if record
            .extras
            .insert(topic.to_string(), text.to_string())
            .is_some()
        {
            return Err(err(format!("duplicate extra topic {topic:?}")));
        }
    }
    Ok(record)
}

/// Parses registry TSV text; the result has version 1.
pub fn parse_registry(text: &str) -> Result<Registry, RegistryError> {
    let mut registry = Registry::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let record = parse_line(line, i + 1)?;
        registry.insert(record)?;
    }
    Ok(registry)
}

pub fn load_registry(path: impl AsRef<Path>) -> Result<Registry, RegistryError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| RegistryError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_registry(&text)
}
