//! Corpus data model: panorama samples, knowledge entries, manifests,
//! explanation filtering and corpus statistics.

mod filter;
mod knowledge;
mod manifest;
mod stats;

use std::fmt;
use std::path::{Component, Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{
    filter_explanations, EnglishHeuristic, ExplanationFilter, LanguageDetector, PhraseBlacklist,
    RawExplanationRecord, DEFAULT_MIN_SCORE, MAX_SCORE,
};
pub use knowledge::{load_knowledge, write_knowledge, KnowledgeBase, KnowledgeEntry};
pub use manifest::{
    load_corpus, scan_corpus, write_corpus, CorpusScan, ManifestHeader, RawSample, Violation,
    SCHEMA_VERSION,
};
pub use stats::{corpus_stats, CorpusStats};

/// Bounds on images per panorama observed in the reference corpus.
pub const MIN_PANORAMA_IMAGES: usize = 3;
pub const MAX_PANORAMA_IMAGES: usize = 33;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("manifest not found: {0}")]
    ManifestNotFound(PathBuf),
    #[error("manifest header invalid: {0}")]
    HeaderViolation(String),
    #[error("schema violation in record {record}: {reason}")]
    SchemaViolation { record: usize, reason: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Hierarchical location. Only `country` is mandatory for ground truth;
/// predicted labels may carry an empty country when the answer omitted it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationLabel {
    pub country: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub street: Option<String>,
}

impl LocationLabel {
    pub fn new(country: impl Into<String>) -> Self {
        Self {
            country: country.into(),
            ..Self::default()
        }
    }

    pub fn with_state(mut self, state: impl Into<String>) -> Self {
        self.state = Some(state.into());
        self
    }

    pub fn with_city(mut self, city: impl Into<String>) -> Self {
        self.city = Some(city.into());
        self
    }

    pub fn with_street(mut self, street: impl Into<String>) -> Self {
        self.street = Some(street.into());
        self
    }

    /// Fields in hierarchy order: country, state, city, street. Absent and
    /// empty fields both come back as `""`.
    pub fn levels(&self) -> [&str; 4] {
        [
            self.country.as_str(),
            self.state.as_deref().unwrap_or(""),
            self.city.as_deref().unwrap_or(""),
            self.street.as_deref().unwrap_or(""),
        ]
    }

    /// Ground-truth validity: non-blank country, and no present-but-blank
    /// optional field.
    pub fn validate(&self) -> Result<(), String> {
        if self.country.trim().is_empty() {
            return Err("country is empty".into());
        }
        for (name, value) in [
            ("state", &self.state),
            ("city", &self.city),
            ("street", &self.street),
        ] {
            if let Some(v) = value {
                if v.trim().is_empty() {
                    return Err(format!("{name} is present but empty"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Continent {
    AF,
    AN,
    AS,
    EU,
    NA,
    OC,
    SA,
}

impl Continent {
    pub const ALL: [Continent; 7] = [
        Continent::AF,
        Continent::AN,
        Continent::AS,
        Continent::EU,
        Continent::NA,
        Continent::OC,
        Continent::SA,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Continent::AF => "AF",
            Continent::AN => "AN",
            Continent::AS => "AS",
            Continent::EU => "EU",
            Continent::NA => "NA",
            Continent::OC => "OC",
            Continent::SA => "SA",
        }
    }
}

impl fmt::Display for Continent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Continent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Continent::ALL
            .into_iter()
            .find(|c| c.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown continent `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub lat: f64,
    pub lon: f64,
}

impl Coordinates {
    pub fn validate(&self) -> Result<(), String> {
        if !self.lat.is_finite() || !(-90.0..=90.0).contains(&self.lat) {
            return Err(format!("latitude {} outside [-90, 90]", self.lat));
        }
        if !self.lon.is_finite() || !(-180.0..=180.0).contains(&self.lon) {
            return Err(format!("longitude {} outside [-180, 180]", self.lon));
        }
        Ok(())
    }
}

/// One location: its panorama images, ground-truth label and the reference
/// explanations written for it.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoSample {
    pub id: String,
    /// Image references relative to the corpus image root, in capture order.
    pub panorama: Vec<String>,
    pub coordinates: Coordinates,
    pub location: LocationLabel,
    pub explanations: Vec<String>,
    pub continent: Continent,
}

/// A validated corpus. Immutable after load.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    /// Resolved directory that image references are relative to.
    pub image_root: PathBuf,
    pub samples: Vec<GeoSample>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&GeoSample> {
        self.samples.iter().find(|s| s.id == id)
    }

    pub fn resolve(&self, image_ref: &str) -> PathBuf {
        self.image_root.join(image_ref)
    }
}

/// Image references must be relative paths that stay under the image root.
pub(crate) fn check_image_ref(root: &Path, image_ref: &str) -> Result<(), String> {
    if image_ref.trim().is_empty() {
        return Err("empty image reference".into());
    }
    let rel = Path::new(image_ref);
    if rel
        .components()
        .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir))
    {
        return Err(format!("image reference `{image_ref}` escapes the image root"));
    }
    if !root.join(rel).is_file() {
        return Err(format!("image `{image_ref}` not found under image root"));
    }
    Ok(())
}
