//! HTTP clients for the detector, encoder and generator services.
//!
//! Wire schemas:
//! * `POST /detect {image_b64, terms[]} -> {detections: [{x, y, w, h, term, confidence}]}`
//! * `POST /embed {image_b64} | {text} -> {dim, values[]}`
//! * `POST /generate` with a chat-completions body; the answer is the first
//!   choice's message content.

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{
    BackendConfig, BackendError, Detection, DetectorBackend, EncoderBackend, GenerationRequest,
    GeneratorBackend, HttpClient, ImageInput,
};
use crate::index::EmbeddingVector;

fn malformed(endpoint: &str, reason: impl Into<String>) -> BackendError {
    BackendError::MalformedResponse {
        endpoint: endpoint.to_string(),
        reason: reason.into(),
    }
}

pub struct RemoteDetector {
    http: HttpClient,
}

impl RemoteDetector {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        Ok(Self {
            http: HttpClient::new(config)?,
        })
    }
}

#[derive(Deserialize)]
struct DetectResponse {
    detections: Vec<Detection>,
}

impl DetectorBackend for RemoteDetector {
    fn endpoint(&self) -> &str {
        self.http.endpoint()
    }

    fn detect(&self, image: ImageInput<'_>, terms: &[String]) -> Result<Vec<Detection>, BackendError> {
        let body = json!({ "image_b64": BASE64.encode(image.bytes), "terms": terms });
        let value = self.http.post_json("detect", &body)?;
        let parsed: DetectResponse =
            serde_json::from_value(value).map_err(|e| malformed(self.endpoint(), e.to_string()))?;
        for d in &parsed.detections {
            if !terms.contains(&d.term) {
                return Err(malformed(self.endpoint(), format!("unrequested term `{}`", d.term)));
            }
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(malformed(self.endpoint(), format!("confidence {} outside [0, 1]", d.confidence)));
            }
            if !d.bbox.is_valid() {
                return Err(malformed(self.endpoint(), format!("invalid box {:?}", d.bbox)));
            }
        }
        Ok(parsed.detections)
    }
}

pub struct RemoteEncoder {
    http: HttpClient,
    encoder_id: String,
    dim: usize,
    text: bool,
}

impl RemoteEncoder {
    /// `encoder_id` names the embedding space (model and revision); `dim` is
    /// the dimension every response must have.
    pub fn new(config: BackendConfig, encoder_id: impl Into<String>, dim: usize, supports_text: bool) -> Result<Self, BackendError> {
        if dim == 0 {
            return Err(BackendError::InvalidConfig("encoder dim must be positive".into()));
        }
        Ok(Self {
            http: HttpClient::new(config)?,
            encoder_id: encoder_id.into(),
            dim,
            text: supports_text,
        })
    }

    fn embed(&self, body: Value) -> Result<EmbeddingVector, BackendError> {
        #[derive(Deserialize)]
        struct EmbedResponse {
            dim: usize,
            values: Vec<f64>,
        }
        let value = self.http.post_json("embed", &body)?;
        let parsed: EmbedResponse =
            serde_json::from_value(value).map_err(|e| malformed(self.endpoint(), e.to_string()))?;
        if parsed.values.len() != parsed.dim {
            return Err(malformed(
                self.endpoint(),
                format!("declared dim {} but sent {} values", parsed.dim, parsed.values.len()),
            ));
        }
        if parsed.dim != self.dim {
            return Err(BackendError::DimensionMismatch {
                endpoint: self.endpoint().to_string(),
                expected: self.dim,
                got: parsed.dim,
            });
        }
        EmbeddingVector::new(parsed.values).map_err(|e| malformed(self.endpoint(), e.to_string()))
    }
}

impl EncoderBackend for RemoteEncoder {
    fn encoder_id(&self) -> &str {
        &self.encoder_id
    }

    fn endpoint(&self) -> &str {
        self.http.endpoint()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_image(&self, bytes: &[u8]) -> Result<EmbeddingVector, BackendError> {
        self.embed(json!({ "image_b64": BASE64.encode(bytes) }))
    }

    fn supports_text(&self) -> bool {
        self.text
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        if !self.text {
            return Err(BackendError::Unsupported {
                endpoint: self.endpoint().to_string(),
                capability: "text embeddings".into(),
            });
        }
        self.embed(json!({ "text": text }))
    }
}

pub struct RemoteGenerator {
    http: HttpClient,
    model_id: String,
}

impl RemoteGenerator {
    pub fn new(config: BackendConfig, model_id: impl Into<String>) -> Result<Self, BackendError> {
        Ok(Self {
            http: HttpClient::new(config)?,
            model_id: model_id.into(),
        })
    }

    /// Chat-completions body: one user message whose content parts are the
    /// images in order followed by the text prompt.
    pub fn request_body(&self, request: &GenerationRequest) -> Value {
        let mut content: Vec<Value> = request
            .images
            .iter()
            .map(|img| {
                json!({
                    "type": "image_url",
                    "image_url": { "url": format!("data:image/png;base64,{}", BASE64.encode(&img.png)) },
                })
            })
            .collect();
        content.push(json!({ "type": "text", "text": request.prompt }));
        let mut body = json!({
            "model": self.model_id,
            "messages": [{ "role": "user", "content": content }],
        });
        let options = serde_json::to_value(&request.options).expect("options serialize");
        if let (Value::Object(body), Value::Object(options)) = (&mut body, options) {
            body.extend(options);
        }
        body
    }
}

fn extract_text(endpoint: &str, value: &Value) -> Result<String, BackendError> {
    let content = value
        .pointer("/choices/0/message/content")
        .ok_or_else(|| malformed(endpoint, "missing choices[0].message.content"))?;
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => parts
            .iter()
            .map(|p| match (p.get("type").and_then(Value::as_str), p.get("text").and_then(Value::as_str)) {
                (Some("text"), Some(t)) => Ok(t),
                _ => Err(malformed(endpoint, "non-text content part")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.concat()),
        _ => Err(malformed(endpoint, "message content is neither text nor parts")),
    }
}

impl GeneratorBackend for RemoteGenerator {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn endpoint(&self) -> &str {
        self.http.endpoint()
    }

    fn generate(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        let value = self.http.post_json("generate", &self.request_body(request))?;
        extract_text(self.endpoint(), &value)
    }
}
