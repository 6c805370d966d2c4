//! Stage one: detection vocabulary and fine-grained visual clue extraction.

mod geometry;
mod vocabulary;

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, Detection, DetectorBackend, ImageInput};

pub use geometry::{iou, BoundingBox};
pub use vocabulary::{
    build_prompt_vocabulary, candidate_tokens, DetectionPromptVocabulary, MAX_TERM_WORDS,
};

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("no candidate nouns in corpus text")]
    EmptyCorpusText,
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("empty panorama")]
    EmptyPanorama,
    #[error("detector failed on image `{image}`: {source}")]
    Backend {
        image: String,
        #[source]
        source: BackendError,
    },
    #[error("cannot decode image `{image}`: {reason}")]
    ImageDecode { image: String, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionParams {
    pub min_confidence: f64,
    pub iou_threshold: f64,
    pub max_clues_per_sample: usize,
    pub pad_fraction: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            min_confidence: 0.35,
            iou_threshold: 0.5,
            max_clues_per_sample: 12,
            pad_fraction: 0.1,
        }
    }
}

/// A detected fine-grained element with its crop on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualClue {
    pub id: String,
    pub sample_id: String,
    pub source_image: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    pub term: String,
    pub confidence: f64,
    pub crop: PathBuf,
}

/// Where a sample's images come from and where its crops go.
#[derive(Debug, Clone, Copy)]
pub struct ClueSource<'a> {
    pub sample_id: &'a str,
    pub panorama: &'a [String],
    pub image_root: &'a Path,
    pub crop_dir: &'a Path,
}

#[derive(Debug, Clone)]
struct Candidate {
    image_index: usize,
    order: usize,
    bbox: BoundingBox,
    term: String,
    confidence: f64,
}

fn by_confidence(a: &Candidate, b: &Candidate) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.image_index.cmp(&b.image_index))
        .then(a.order.cmp(&b.order))
}

/// Greedy per-term non-maximum suppression: a box is dropped when it
/// overlaps an already kept box of the same term by more than `threshold`.
fn suppress(mut candidates: Vec<Candidate>, threshold: f64) -> Vec<Candidate> {
    candidates.sort_by(by_confidence);
    let mut kept: Vec<Candidate> = Vec::new();
    for c in candidates {
        let overlaps = kept
            .iter()
            .any(|k| k.term == c.term && iou(&k.bbox, &c.bbox) > threshold);
        if !overlaps {
            kept.push(c);
        }
    }
    kept
}

fn check_contract(
    detection: &Detection,
    vocab: &DetectionPromptVocabulary,
) -> Result<(), String> {
    if !vocab.contains(&detection.term) {
        return Err(format!("term `{}` was not requested", detection.term));
    }
    if !detection.confidence.is_finite() || !(0.0..=1.0).contains(&detection.confidence) {
        return Err(format!("confidence {} outside [0, 1]", detection.confidence));
    }
    if !detection.bbox.is_valid() {
        return Err(format!("invalid box {:?}", detection.bbox));
    }
    Ok(())
}

pub(crate) fn file_stem_for(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Runs the detector on every panorama image and returns the union of the
/// per-image detections after confidence filtering, per-image NMS and
/// truncation to the highest-confidence clues. Crops are written to
/// `source.crop_dir` as `<clue id>.png`. Clues are ordered by
/// (image index, detector output order).
pub fn detect_clues(
    source: ClueSource<'_>,
    vocab: &DetectionPromptVocabulary,
    detector: &dyn DetectorBackend,
    params: &DetectionParams,
) -> Result<Vec<VisualClue>, DetectionError> {
    if source.panorama.is_empty() {
        return Err(DetectionError::EmptyPanorama);
    }
    let mut images = Vec::with_capacity(source.panorama.len());
    let mut candidates = Vec::new();
    for (image_index, image_ref) in source.panorama.iter().enumerate() {
        let path = source.image_root.join(image_ref);
        let bytes = fs::read(&path).map_err(|e| DetectionError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let decoded = image::load_from_memory(&bytes).map_err(|e| DetectionError::ImageDecode {
            image: image_ref.clone(),
            reason: e.to_string(),
        })?;
        let detections = detector
            .detect(ImageInput { id: image_ref, bytes: &bytes }, &vocab.terms)
            .map_err(|e| DetectionError::Backend {
                image: image_ref.clone(),
                source: e,
            })?;
        let mut per_image = Vec::new();
        for (order, det) in detections.into_iter().enumerate() {
            check_contract(&det, vocab).map_err(|reason| DetectionError::Backend {
                image: image_ref.clone(),
                source: BackendError::MalformedResponse {
                    endpoint: detector.endpoint().to_string(),
                    reason,
                },
            })?;
            if det.confidence < params.min_confidence {
                continue;
            }
            let Some(bbox) = det.bbox.clamp_to(decoded.width(), decoded.height()) else {
                continue;
            };
            per_image.push(Candidate {
                image_index,
                order,
                bbox,
                term: det.term,
                confidence: det.confidence,
            });
        }
        candidates.extend(suppress(per_image, params.iou_threshold));
        images.push(decoded);
    }

    candidates.sort_by(by_confidence);
    candidates.truncate(params.max_clues_per_sample);
    candidates.sort_by_key(|c| (c.image_index, c.order));

    if !candidates.is_empty() {
        fs::create_dir_all(source.crop_dir).map_err(|e| DetectionError::Io {
            path: source.crop_dir.display().to_string(),
            source: e,
        })?;
    }
    let mut clues = Vec::with_capacity(candidates.len());
    for (n, c) in candidates.into_iter().enumerate() {
        let id = format!("{}-clue{n:02}", source.sample_id);
        let img = &images[c.image_index];
        let (x, y, w, h) = c.bbox.padded(params.pad_fraction).pixel_rect(img.width(), img.height());
        let crop = img.crop_imm(x, y, w, h).to_rgb8();
        let crop_path = source.crop_dir.join(format!("{}.png", file_stem_for(&id)));
        crop.save(&crop_path).map_err(|e| DetectionError::Io {
            path: crop_path.display().to_string(),
            source: std::io::Error::other(e.to_string()),
        })?;
        clues.push(VisualClue {
            id,
            sample_id: source.sample_id.to_string(),
            source_image: source.panorama[c.image_index].clone(),
            bbox: c.bbox,
            term: c.term,
            confidence: c.confidence,
            crop: crop_path,
        });
    }
    Ok(clues)
}
