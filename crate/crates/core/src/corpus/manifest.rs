//! Line-delimited manifest framing shared by corpus and knowledge manifests.
//!
//! The first non-blank line is a header `{"schema_version": 1, "image_root": "..."}`;
//! every following non-blank line is one JSON record. `image_root` is resolved
//! relative to the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::filter::{RawExplanationRecord, MAX_SCORE};
use super::{
    check_image_ref, Continent, Coordinates, Corpus, CorpusError, GeoSample, LocationLabel,
    MAX_PANORAMA_IMAGES, MIN_PANORAMA_IMAGES,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub schema_version: u32,
    pub image_root: String,
}

pub(crate) struct ManifestLines {
    pub image_root: PathBuf,
    pub header: Option<ManifestHeader>,
    pub records: Vec<String>,
}

pub(crate) fn read_manifest(path: &Path) -> Result<ManifestLines, CorpusError> {
    if !path.is_file() {
        return Err(CorpusError::ManifestNotFound(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let Some(first) = lines.next() else {
        return Ok(ManifestLines {
            image_root: base.to_path_buf(),
            header: None,
            records: Vec::new(),
        });
    };
    let header: ManifestHeader = serde_json::from_str(first)
        .map_err(|e| CorpusError::HeaderViolation(e.to_string()))?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(CorpusError::HeaderViolation(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            header.schema_version
        )));
    }
    Ok(ManifestLines {
        image_root: base.join(&header.image_root),
        header: Some(header),
        records: lines.map(str::to_owned).collect(),
    })
}

/// Declared root to write into a manifest at `manifest_path` so that it
/// resolves back to `image_root`: relative whenever both paths can be
/// resolved, otherwise as given.
pub(crate) fn declared_root(manifest_path: &Path, image_root: &Path) -> String {
    let base = manifest_path.parent().unwrap_or_else(|| Path::new(""));
    let base = if base.as_os_str().is_empty() { Path::new(".") } else { base };
    let (Ok(from), Ok(to)) = (fs::canonicalize(base), fs::canonicalize(image_root)) else {
        return image_root.to_string_lossy().into_owned();
    };
    let from: Vec<_> = from.components().collect();
    let to: Vec<_> = to.components().collect();
    let common = from.iter().zip(&to).take_while(|(a, b)| a == b).count();
    let mut rel = PathBuf::new();
    for _ in common..from.len() {
        rel.push("..");
    }
    for c in &to[common..] {
        rel.push(c);
    }
    if rel.as_os_str().is_empty() {
        ".".to_string()
    } else {
        rel.to_string_lossy().into_owned()
    }
}

pub(crate) fn write_lines<T: Serialize>(
    path: &Path,
    header: &ManifestHeader,
    records: impl IntoIterator<Item = T>,
) -> Result<(), CorpusError> {
    let file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut put = |line: String| writeln!(out, "{line}").map_err(|e| CorpusError::io(path, e));
    put(serde_json::to_string(header).expect("header serializes"))?;
    for record in records {
        put(serde_json::to_string(&record).expect("record serializes"))?;
    }
    out.flush().map_err(|e| CorpusError::io(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ExplanationEntry {
    Text(String),
    Scored(RawExplanationRecord),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleLine<E> {
    id: String,
    panorama: Vec<String>,
    lat: f64,
    lon: f64,
    country: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    city: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    street: Option<String>,
    continent: Continent,
    explanations: Vec<E>,
}

/// A parsed but not yet filtered sample, as found in an ingestion manifest.
/// Plain-string explanations are treated as curated and carry [`MAX_SCORE`].
#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub record: usize,
    pub id: String,
    pub panorama: Vec<String>,
    pub coordinates: Coordinates,
    pub location: LocationLabel,
    pub continent: Continent,
    pub explanations: Vec<RawExplanationRecord>,
}

impl RawSample {
    /// Turns the raw record into a sample with the given explanation texts,
    /// enforcing every sample invariant.
    pub fn into_sample(
        self,
        explanations: Vec<String>,
        image_root: &Path,
    ) -> Result<GeoSample, Violation> {
        let sample = GeoSample {
            id: self.id,
            panorama: self.panorama,
            coordinates: self.coordinates,
            location: self.location,
            explanations,
            continent: self.continent,
        };
        validate_sample(&sample, image_root).map_err(|reason| Violation {
            record: self.record,
            id: Some(sample.id.clone()),
            reason,
            duplicate: false,
        })?;
        Ok(sample)
    }

    pub fn explanation_texts(&self) -> Vec<String> {
        self.explanations.iter().map(|e| e.text.clone()).collect()
    }
}

/// One rejected manifest record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub record: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub reason: String,
    #[serde(skip)]
    pub duplicate: bool,
}

/// Lenient pass over a corpus manifest: every record is parsed and validated
/// independently so that all violations can be reported at once.
#[derive(Debug)]
pub struct CorpusScan {
    pub header: Option<ManifestHeader>,
    pub image_root: PathBuf,
    pub records: Vec<Result<RawSample, Violation>>,
}

pub fn scan_corpus(manifest_path: &Path) -> Result<CorpusScan, CorpusError> {
    let lines = read_manifest(manifest_path)?;
    let mut seen = HashSet::new();
    let records = lines
        .records
        .iter()
        .enumerate()
        .map(|(record, line)| {
            let raw = parse_sample_line(record, line, &lines.image_root)?;
            if !seen.insert(raw.id.clone()) {
                return Err(Violation {
                    record,
                    id: Some(raw.id.clone()),
                    reason: format!("duplicate id `{}`", raw.id),
                    duplicate: true,
                });
            }
            Ok(raw)
        })
        .collect();
    Ok(CorpusScan {
        header: lines.header,
        image_root: lines.image_root,
        records,
    })
}

fn parse_sample_line(record: usize, line: &str, root: &Path) -> Result<RawSample, Violation> {
    let violation = |id: Option<String>, reason: String| Violation {
        record,
        id,
        reason,
        duplicate: false,
    };
    let parsed: SampleLine<ExplanationEntry> =
        serde_json::from_str(line).map_err(|e| violation(None, e.to_string()))?;
    let explanations = parsed
        .explanations
        .into_iter()
        .map(|e| match e {
            ExplanationEntry::Text(text) => RawExplanationRecord {
                text,
                score: MAX_SCORE,
                language_hint: None,
            },
            ExplanationEntry::Scored(r) => r,
        })
        .collect::<Vec<_>>();
    if let Some(bad) = explanations.iter().find(|e| !(0..=MAX_SCORE).contains(&e.score)) {
        return Err(violation(
            Some(parsed.id),
            format!("explanation score {} outside [0, {MAX_SCORE}]", bad.score),
        ));
    }
    let raw = RawSample {
        record,
        id: parsed.id,
        panorama: parsed.panorama,
        coordinates: Coordinates {
            lat: parsed.lat,
            lon: parsed.lon,
        },
        location: LocationLabel {
            country: parsed.country,
            state: parsed.state,
            city: parsed.city,
            street: parsed.street,
        },
        continent: parsed.continent,
        explanations,
    };
    // Structural checks run on the unfiltered texts so that malformed
    // records are reported even when filtering would drop them.
    let texts = raw.explanation_texts();
    raw.clone().into_sample(texts, root)?;
    Ok(raw)
}

fn validate_sample(sample: &GeoSample, root: &Path) -> Result<(), String> {
    if sample.id.trim().is_empty() {
        return Err("id is empty".into());
    }
    let n = sample.panorama.len();
    if n < MIN_PANORAMA_IMAGES {
        return Err(format!("panorama count below {MIN_PANORAMA_IMAGES} (got {n})"));
    }
    if n > MAX_PANORAMA_IMAGES {
        return Err(format!("panorama count above {MAX_PANORAMA_IMAGES} (got {n})"));
    }
    sample.coordinates.validate()?;
    sample.location.validate()?;
    if sample.explanations.is_empty() {
        return Err("no explanations".into());
    }
    if sample.explanations.iter().any(|e| e.trim().is_empty()) {
        return Err("empty explanation".into());
    }
    for image in &sample.panorama {
        check_image_ref(root, image)?;
    }
    Ok(())
}

/// Loads and validates a corpus manifest. Fails on the first invalid record.
pub fn load_corpus(manifest_path: &Path) -> Result<Corpus, CorpusError> {
    let scan = scan_corpus(manifest_path)?;
    let mut samples = Vec::with_capacity(scan.records.len());
    for record in scan.records {
        match record {
            Ok(raw) => {
                let texts = raw.explanation_texts();
                let sample = raw
                    .into_sample(texts, &scan.image_root)
                    .expect("validated during scan");
                samples.push(sample);
            }
            Err(v) if v.duplicate => {
                return Err(CorpusError::DuplicateId(v.id.unwrap_or_default()))
            }
            Err(v) => {
                return Err(CorpusError::SchemaViolation {
                    record: v.record,
                    reason: v.reason,
                })
            }
        }
    }
    Ok(Corpus {
        image_root: scan.image_root,
        samples,
    })
}

/// Writes `corpus` as a manifest at `manifest_path`. The declared image root
/// is relative when the images live under the manifest's directory.
pub fn write_corpus(manifest_path: &Path, corpus: &Corpus) -> Result<(), CorpusError> {
    let header = ManifestHeader {
        schema_version: SCHEMA_VERSION,
        image_root: declared_root(manifest_path, &corpus.image_root),
    };
    let records = corpus.samples.iter().map(|s| SampleLine {
        id: s.id.clone(),
        panorama: s.panorama.clone(),
        lat: s.coordinates.lat,
        lon: s.coordinates.lon,
        country: s.location.country.clone(),
        state: s.location.state.clone(),
        city: s.location.city.clone(),
        street: s.location.street.clone(),
        continent: s.continent,
        explanations: s.explanations.clone(),
    });
    write_lines(manifest_path, &header, records)
}
