//! Contracts for the three external model services, their remote clients
//! and deterministic mocks.
//!
//! * detector: `(image bytes, terms) -> [{box, term, confidence}]`
//! * encoder: `image bytes -> vector` of a fixed dimension, optionally text
//! * generator: `(ordered images, text prompt, sampling options) -> text`

mod http;
mod mock;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::BoundingBox;
use crate::index::EmbeddingVector;

pub use http::HttpClient;
pub use mock::{EchoEntry, MockDetector, MockEncoder, MockGenerator, MockGeneratorMode};
pub use remote::{RemoteDetector, RemoteEncoder, RemoteGenerator};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("{endpoint} unavailable after {attempts} attempt(s): {reason}")]
    Unavailable {
        endpoint: String,
        attempts: u32,
        reason: String,
    },
    #[error("{endpoint} returned a malformed response: {reason}")]
    MalformedResponse { endpoint: String, reason: String },
    #[error("{endpoint} exceeded its deadline")]
    DeadlineExceeded { endpoint: String },
    #[error("{endpoint} rejected the request with status {status}: {body}")]
    Rejected {
        endpoint: String,
        status: u16,
        body: String,
    },
    #[error("{endpoint} returned dimension {got}, expected {expected}")]
    DimensionMismatch {
        endpoint: String,
        expected: usize,
        got: usize,
    },
    #[error("no scripted output for key `{0}`")]
    UnknownScriptKey(String),
    #[error("{endpoint} does not support {capability}")]
    Unsupported { endpoint: String, capability: String },
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
}

/// One detector hit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(flatten)]
    pub bbox: BoundingBox,
    pub term: String,
    pub confidence: f64,
}

/// Image handed to a backend. `id` is the corpus image reference and is
/// used for diagnostics and by fixture-driven mocks.
#[derive(Debug, Clone, Copy)]
pub struct ImageInput<'a> {
    pub id: &'a str,
    pub bytes: &'a [u8],
}

pub trait DetectorBackend: Send + Sync {
    fn endpoint(&self) -> &str;
    fn detect(&self, image: ImageInput<'_>, terms: &[String]) -> Result<Vec<Detection>, BackendError>;
}

pub trait EncoderBackend: Send + Sync {
    /// Identifies the embedding space; indices record it for compatibility
    /// checks.
    fn encoder_id(&self) -> &str;
    fn endpoint(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_image(&self, bytes: &[u8]) -> Result<EmbeddingVector, BackendError>;

    fn supports_text(&self) -> bool {
        false
    }

    fn embed_text(&self, _text: &str) -> Result<EmbeddingVector, BackendError> {
        Err(BackendError::Unsupported {
            endpoint: self.endpoint().to_string(),
            capability: "text embeddings".into(),
        })
    }
}

/// PNG-encoded image part of a generation request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptImage {
    pub label: String,
    pub png: Vec<u8>,
}

/// Pass-through sampling options; unset fields are left to the service.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingOptions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub sample_id: String,
    /// Global context first, then local clues.
    pub images: Vec<PromptImage>,
    pub prompt: String,
    pub options: SamplingOptions,
}

pub trait GeneratorBackend: Send + Sync {
    fn model_id(&self) -> &str;
    fn endpoint(&self) -> &str;
    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError>;
}

/// Connection settings for a remote backend. Credentials are read from the
/// named environment variable at call time and never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub endpoint: String,
    #[serde(default = "BackendConfig::default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "BackendConfig::default_retries")]
    pub max_retries: u32,
    #[serde(default = "BackendConfig::default_backoff")]
    pub backoff_base_secs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
}

impl BackendConfig {
    fn default_timeout() -> f64 {
        60.0
    }

    fn default_retries() -> u32 {
        3
    }

    fn default_backoff() -> f64 {
        0.5
    }

    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout_secs: Self::default_timeout(),
            max_retries: Self::default_retries(),
            backoff_base_secs: Self::default_backoff(),
            api_key_env: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.endpoint.trim().is_empty() {
            return Err(BackendError::InvalidConfig("endpoint is empty".into()));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(BackendError::InvalidConfig(format!(
                "timeout_secs must be positive, got {}",
                self.timeout_secs
            )));
        }
        if !(self.backoff_base_secs.is_finite() && self.backoff_base_secs >= 0.0) {
            return Err(BackendError::InvalidConfig(format!(
                "backoff_base_secs must be non-negative, got {}",
                self.backoff_base_secs
            )));
        }
        Ok(())
    }
}
