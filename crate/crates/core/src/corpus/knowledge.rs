use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{declared_root, read_manifest, write_lines, ManifestHeader, SCHEMA_VERSION};
use super::{check_image_ref, CorpusError};

/// A country-specific object image and the snippet explaining how to
/// recognise the country from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeEntry {
    pub id: String,
    pub image: String,
    pub country: String,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    pub image_root: PathBuf,
    pub entries: Vec<KnowledgeEntry>,
}

impl KnowledgeBase {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&KnowledgeEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn resolve(&self, image_ref: &str) -> PathBuf {
        self.image_root.join(image_ref)
    }
}

pub fn load_knowledge(manifest_path: &Path) -> Result<KnowledgeBase, CorpusError> {
    let lines = read_manifest(manifest_path)?;
    let mut seen = HashSet::new();
    let mut entries = Vec::with_capacity(lines.records.len());
    for (record, line) in lines.records.iter().enumerate() {
        let violation = |reason: String| CorpusError::SchemaViolation { record, reason };
        let entry: KnowledgeEntry =
            serde_json::from_str(line).map_err(|e| violation(e.to_string()))?;
        if entry.id.trim().is_empty() {
            return Err(violation("id is empty".into()));
        }
        if entry.snippet.trim().is_empty() {
            return Err(violation("snippet is empty".into()));
        }
        if entry.country.trim().is_empty() {
            return Err(violation("country is empty".into()));
        }
        check_image_ref(&lines.image_root, &entry.image).map_err(violation)?;
        if !seen.insert(entry.id.clone()) {
            return Err(CorpusError::DuplicateId(entry.id));
        }
        entries.push(entry);
    }
    Ok(KnowledgeBase {
        image_root: lines.image_root,
        entries,
    })
}

pub fn write_knowledge(manifest_path: &Path, kb: &KnowledgeBase) -> Result<(), CorpusError> {
    let header = ManifestHeader {
        schema_version: SCHEMA_VERSION,
        image_root: declared_root(manifest_path, &kb.image_root),
    };
    write_lines(manifest_path, &header, &kb.entries)
}
