//! Deterministic in-process backends. Each mock is a pure function of its
//! construction parameters and call inputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    BackendError, Detection, DetectorBackend, EncoderBackend, GenerationRequest, GeneratorBackend,
    ImageInput,
};
use crate::corpus::LocationLabel;
use crate::index::EmbeddingVector;
use crate::reasoning::format_answer;

/// Detector that replays a fixture keyed by image reference.
#[derive(Debug, Clone, Default)]
pub struct MockDetector {
    fixture: BTreeMap<String, Vec<Detection>>,
}

impl MockDetector {
    pub fn new(fixture: BTreeMap<String, Vec<Detection>>) -> Self {
        Self { fixture }
    }

    /// Reads a JSON object `{image_ref: [{x, y, w, h, term, confidence}]}`.
    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::InvalidConfig(format!("detector fixture {}: {e}", path.display())))?;
        let fixture: BTreeMap<String, Vec<Detection>> = serde_json::from_str(&text)
            .map_err(|e| BackendError::InvalidConfig(format!("detector fixture {}: {e}", path.display())))?;
        if let Some((image, d)) = fixture
            .iter()
            .flat_map(|(k, v)| v.iter().map(move |d| (k, d)))
            .find(|(_, d)| !d.bbox.is_valid() || !(0.0..=1.0).contains(&d.confidence))
        {
            return Err(BackendError::InvalidConfig(format!(
                "detector fixture entry for `{image}` is invalid: {d:?}"
            )));
        }
        Ok(Self::new(fixture))
    }
}

impl DetectorBackend for MockDetector {
    fn endpoint(&self) -> &str {
        "mock://detector"
    }

    fn detect(&self, image: ImageInput<'_>, terms: &[String]) -> Result<Vec<Detection>, BackendError> {
        Ok(self
            .fixture
            .get(image.id)
            .map(|dets| dets.iter().filter(|d| terms.contains(&d.term)).cloned().collect())
            .unwrap_or_default())
    }
}

/// Encoder producing unit vectors from a SHA-256 keystream over
/// `(seed, input kind, input bytes)`.
#[derive(Debug, Clone)]
pub struct MockEncoder {
    seed: u64,
    dim: usize,
    id: String,
}

impl MockEncoder {
    pub fn new(seed: u64, dim: usize) -> Result<Self, BackendError> {
        if dim < 2 {
            return Err(BackendError::InvalidConfig(format!("mock encoder dim must be >= 2, got {dim}")));
        }
        Ok(Self {
            seed,
            dim,
            id: format!("mock-encoder/seed={seed}/dim={dim}"),
        })
    }

    fn vector(&self, kind: &[u8], bytes: &[u8]) -> EmbeddingVector {
        let key = Sha256::new()
            .chain_update(self.seed.to_le_bytes())
            .chain_update(kind)
            .chain_update((bytes.len() as u64).to_le_bytes())
            .chain_update(bytes)
            .finalize();
        let mut values = Vec::with_capacity(self.dim);
        let mut block = 0u64;
        while values.len() < self.dim {
            let out = Sha256::new().chain_update(key).chain_update(block.to_le_bytes()).finalize();
            for chunk in out.chunks_exact(8) {
                if values.len() == self.dim {
                    break;
                }
                let word = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
                // 53 random bits mapped to [-1, 1).
                values.push((word >> 11) as f64 / (1u64 << 52) as f64 - 1.0);
            }
            block += 1;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        } else {
            values[0] = 1.0;
        }
        EmbeddingVector::new(values).expect("finite by construction")
    }
}

impl EncoderBackend for MockEncoder {
    fn encoder_id(&self) -> &str {
        &self.id
    }

    fn endpoint(&self) -> &str {
        "mock://encoder"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image(&self, bytes: &[u8]) -> Result<EmbeddingVector, BackendError> {
        Ok(self.vector(b"image", bytes))
    }

    fn supports_text(&self) -> bool {
        true
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        Ok(self.vector(b"text", text.as_bytes()))
    }
}

/// Location and explanation the echo generator answers with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EchoEntry {
    pub location: LocationLabel,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MockGeneratorMode {
    /// Renders a well-formed `PLACE {...}. explanation` answer per sample id.
    EchoTemplate(BTreeMap<String, EchoEntry>),
    FixedText(String),
    Script(BTreeMap<String, String>),
}

#[derive(Debug, Clone)]
pub struct MockGenerator {
    mode: MockGeneratorMode,
    model_id: String,
}

impl MockGenerator {
    pub fn new(mode: MockGeneratorMode) -> Self {
        let model_id = match &mode {
            MockGeneratorMode::EchoTemplate(_) => "mock-generator/echo_template",
            MockGeneratorMode::FixedText(_) => "mock-generator/fixed_text",
            MockGeneratorMode::Script(_) => "mock-generator/script",
        }
        .to_string();
        Self { mode, model_id }
    }
}

impl GeneratorBackend for MockGenerator {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn endpoint(&self) -> &str {
        "mock://generator"
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        let key = &request.sample_id;
        match &self.mode {
            MockGeneratorMode::FixedText(text) => Ok(text.clone()),
            MockGeneratorMode::Script(table) => table
                .get(key)
                .cloned()
                .ok_or_else(|| BackendError::UnknownScriptKey(key.clone())),
            MockGeneratorMode::EchoTemplate(table) => table
                .get(key)
                .map(|e| format_answer(&e.location, &e.explanation))
                .ok_or_else(|| BackendError::UnknownScriptKey(key.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::SamplingOptions;
    use crate::detection::BoundingBox;
    use crate::index::cosine;
    use crate::reasoning::parse_answer;

    fn request(sample_id: &str) -> GenerationRequest {
        GenerationRequest {
            sample_id: sample_id.into(),
            images: vec![],
            prompt: "p".into(),
            options: SamplingOptions::default(),
        }
    }

    #[test]
    fn detector_fixture_semantics() {
        let fixture = BTreeMap::from([(
            "a.png".to_string(),
            vec![
                Detection { bbox: BoundingBox::new(0.0, 0.0, 2.0, 2.0), term: "car".into(), confidence: 0.9 },
                Detection { bbox: BoundingBox::new(1.0, 1.0, 2.0, 2.0), term: "giraffe".into(), confidence: 0.9 },
            ],
        )]);
        let d = MockDetector::new(fixture);
        let terms = vec!["car".to_string(), "flag".to_string()];
        let img = |id| ImageInput { id, bytes: b"" };
        assert!(d.detect(img("missing.png"), &terms).unwrap().is_empty());
        let hits = d.detect(img("a.png"), &terms).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].term, "car");
        assert_eq!(d.detect(img("a.png"), &terms).unwrap(), hits);
    }

    #[test]
    fn encoder_is_deterministic_and_unit_norm() {
        let e = MockEncoder::new(7, 768).unwrap();
        let a = e.embed_image(b"bytes").unwrap();
        assert_eq!(a, e.embed_image(b"bytes").unwrap());
        assert_eq!(a.dim(), 768);
        let norm = a.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        let b = e.embed_image(b"other bytes").unwrap();
        assert!(cosine(&a, &b).unwrap() < 1.0);
        let other_seed = MockEncoder::new(8, 768).unwrap();
        assert_ne!(a, other_seed.embed_image(b"bytes").unwrap());
        assert_ne!(a, e.embed_text("bytes").unwrap());
        assert!(MockEncoder::new(1, 1).is_err());
    }

    #[test]
    fn generator_modes() {
        let fixed = MockGenerator::new(MockGeneratorMode::FixedText("hello".into()));
        assert_eq!(fixed.generate(&request("x")).unwrap(), "hello");
        assert_eq!(fixed.generate(&request("y")).unwrap(), "hello");

        let script = MockGenerator::new(MockGeneratorMode::Script(BTreeMap::from([("a".into(), "A".into())])));
        assert_eq!(script.generate(&request("a")).unwrap(), "A");
        assert_eq!(script.generate(&request("b")), Err(BackendError::UnknownScriptKey("b".into())));

        let location = LocationLabel::new("Chile").with_state("Los Lagos");
        let echo = MockGenerator::new(MockGeneratorMode::EchoTemplate(BTreeMap::from([(
            "a".into(),
            EchoEntry { location: location.clone(), explanation: "Bollards.".into() },
        )])));
        let out = echo.generate(&request("a")).unwrap();
        let parsed = parse_answer(&out).unwrap();
        assert_eq!(parsed.location, location);
        assert_eq!(parsed.explanation, "Bollards.");
        assert_eq!(echo.model_id(), "mock-generator/echo_template");
    }
}
