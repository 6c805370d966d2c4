//! JSON-over-HTTP transport with retries shared by the remote clients.

use std::time::Duration;

use serde_json::Value;
use ureq::Agent;

use super::{BackendConfig, BackendError};

const MAX_BACKOFF_SECS: f64 = 30.0;

/// Blocking JSON client. Transport errors and 5xx responses are retried
/// with exponential backoff (`backoff_base * 2^attempt`); 4xx responses are
/// never retried. Each attempt is bounded by `timeout_secs`.
#[derive(Debug, Clone)]
pub struct HttpClient {
    agent: Agent,
    config: BackendConfig,
}

enum Attempt {
    Retryable(String),
    Timeout,
}

impl HttpClient {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let agent: Agent = Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { agent, config })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    pub fn endpoint(&self) -> &str {
        &self.config.endpoint
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path.trim_start_matches('/'))
    }

    fn credential(&self) -> Result<Option<String>, BackendError> {
        match &self.config.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var).map(Some).map_err(|_| {
                BackendError::InvalidConfig(format!("credential variable `{var}` is not set"))
            }),
        }
    }

    pub fn post_json(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let url = self.url(path);
        let payload = body.to_string();
        let token = self.credential()?;
        let attempts = self.config.max_retries + 1;
        let mut last = Attempt::Retryable(String::new());
        for attempt in 0..attempts {
            if attempt > 0 {
                let secs = (self.config.backoff_base_secs * 2f64.powi(attempt as i32 - 1)).min(MAX_BACKOFF_SECS);
                std::thread::sleep(Duration::from_secs_f64(secs));
            }
            let mut request = self.agent.post(&url).header("Content-Type", "application/json");
            if let Some(token) = &token {
                request = request.header("Authorization", format!("Bearer {token}"));
            }
            let mut response = match request.send(payload.as_str()) {
                Ok(r) => r,
                Err(ureq::Error::Timeout(_)) => {
                    last = Attempt::Timeout;
                    continue;
                }
                Err(e) => {
                    last = Attempt::Retryable(e.to_string());
                    continue;
                }
            };
            let status = response.status().as_u16();
            let text = match response.body_mut().read_to_string() {
                Ok(t) => t,
                Err(ureq::Error::Timeout(_)) => {
                    last = Attempt::Timeout;
                    continue;
                }
                Err(e) => {
                    last = Attempt::Retryable(e.to_string());
                    continue;
                }
            };
            match status {
                200..=299 => {
                    return serde_json::from_str(&text).map_err(|e| BackendError::MalformedResponse {
                        endpoint: self.endpoint().to_string(),
                        reason: format!("invalid JSON: {e}"),
                    })
                }
                500..=599 => last = Attempt::Retryable(format!("status {status}")),
                _ => {
                    return Err(BackendError::Rejected {
                        endpoint: self.endpoint().to_string(),
                        status,
                        body: text.chars().take(512).collect(),
                    })
                }
            }
        }
        Err(match last {
            Attempt::Timeout => BackendError::DeadlineExceeded {
                endpoint: self.endpoint().to_string(),
            },
            Attempt::Retryable(reason) => BackendError::Unavailable {
                endpoint: self.endpoint().to_string(),
                attempts,
                reason,
            },
        })
    }
}
