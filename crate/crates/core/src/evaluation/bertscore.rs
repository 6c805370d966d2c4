//! Greedy-matching embedding F1 over per-token text embeddings. Only
//! available with an encoder that supports text.

use std::collections::HashMap;

use super::text::tokenize;
use super::EvaluationError;
use crate::backends::EncoderBackend;
use crate::index::{cosine, EmbeddingVector};

/// Caches token embeddings across calls.
pub struct BertScorer<'a> {
    encoder: &'a dyn EncoderBackend,
    cache: HashMap<String, EmbeddingVector>,
}

impl<'a> BertScorer<'a> {
    pub fn new(encoder: &'a dyn EncoderBackend) -> Result<Self, EvaluationError> {
        if !encoder.supports_text() {
            return Err(EvaluationError::Backend(format!(
                "encoder `{}` has no text embeddings",
                encoder.encoder_id()
            )));
        }
        Ok(Self {
            encoder,
            cache: HashMap::new(),
        })
    }

    fn embed(&mut self, tokens: &[String]) -> Result<Vec<EmbeddingVector>, EvaluationError> {
        tokens
            .iter()
            .map(|t| {
                if let Some(v) = self.cache.get(t) {
                    return Ok(v.clone());
                }
                let v = self.encoder.embed_text(t).map_err(|e| EvaluationError::Backend(e.to_string()))?;
                self.cache.insert(t.clone(), v.clone());
                Ok(v)
            })
            .collect()
    }

    fn greedy(from: &[EmbeddingVector], to: &[EmbeddingVector]) -> Result<f64, EvaluationError> {
        let mut sum = 0.0;
        for a in from {
            let mut best = f64::NEG_INFINITY;
            for b in to {
                let s = cosine(a, b).map_err(|e| EvaluationError::Backend(e.to_string()))?;
                best = best.max(s);
            }
            sum += best;
        }
        Ok(sum / from.len() as f64)
    }

    /// F1 of greedy precision and recall, maximized over references. Empty
    /// candidates or references score 0.
    pub fn score(&mut self, candidate: &str, references: &[&str]) -> Result<f64, EvaluationError> {
        let cand = self.embed(&tokenize(candidate))?;
        if cand.is_empty() {
            return Ok(0.0);
        }
        let mut best: f64 = 0.0;
        for r in references {
            let r = self.embed(&tokenize(r))?;
            if r.is_empty() {
                continue;
            }
            let p = Self::greedy(&cand, &r)?;
            let rec = Self::greedy(&r, &cand)?;
            if p + rec > 0.0 {
                best = best.max(2.0 * p * rec / (p + rec));
            }
        }
        Ok(best)
    }
}
