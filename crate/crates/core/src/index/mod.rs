//! Stage two: knowledge image embeddings, the persisted index and exact
//! top-k (knowledge, clue) pair retrieval.

mod retrieve;
mod store;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, EncoderBackend};
use crate::corpus::KnowledgeBase;

pub use retrieve::{retrieve_topk, select_top_pairs, RetrievalOptions, RetrievalPair, RetrievalResult, ScoredPair};
pub use store::{decode_index, encode_index, load_index, save_index, INDEX_MAGIC, INDEX_VERSION};

pub const DEFAULT_DIM: usize = 768;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero vector")]
    ZeroVector,
    #[error("non-finite vector component at {0}")]
    NonFinite(usize),
    #[error("index build failed: {0}")]
    Build(String),
    #[error("index was built with encoder `{index}` but `{encoder}` was supplied")]
    EncoderMismatch { index: String, encoder: String },
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
    #[error("unsupported index version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("encoder failed on `{item}`: {source}")]
    Backend {
        item: String,
        #[source]
        source: BackendError,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Finite real vector as produced by an encoder. Stored as given, never
/// re-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, IndexError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(IndexError::NonFinite(i));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = IndexError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

/// Cosine similarity `u·v / (‖u‖‖v‖)`, clamped to [-1, 1].
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64, IndexError> {
    if u.dim() != v.dim() {
        return Err(IndexError::DimensionMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    let (mut dot, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in u.0.iter().zip(&v.0) {
        dot += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(IndexError::ZeroVector);
    }
    Ok((dot / (uu.sqrt() * vv.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub knowledge_id: String,
    pub vector: EmbeddingVector,
}

/// Embeddings of every knowledge image, in knowledge manifest order.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeIndex {
    pub encoder_id: String,
    pub dim: usize,
    pub entries: Vec<IndexEntry>,
}

impl KnowledgeIndex {
    pub fn new(encoder_id: String, dim: usize, entries: Vec<IndexEntry>) -> Result<Self, IndexError> {
        let mut ids = HashSet::new();
        for e in &entries {
            if e.vector.dim() != dim {
                return Err(IndexError::DimensionMismatch {
                    expected: dim,
                    got: e.vector.dim(),
                });
            }
            if !ids.insert(e.knowledge_id.as_str()) {
                return Err(IndexError::Build(format!("duplicate knowledge id `{}`", e.knowledge_id)));
            }
        }
        Ok(Self {
            encoder_id,
            dim,
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Embeds every knowledge image with `encoder`, one entry per knowledge
/// entry in manifest order.
pub fn build_index(kb: &KnowledgeBase, encoder: &dyn EncoderBackend) -> Result<KnowledgeIndex, IndexError> {
    if kb.is_empty() {
        return Err(IndexError::Build("empty knowledge base".into()));
    }
    let dim = encoder.dim();
    let mut entries = Vec::with_capacity(kb.len());
    for entry in &kb.entries {
        let path = kb.resolve(&entry.image);
        let bytes = std::fs::read(&path).map_err(|e| IndexError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let vector = encoder.embed_image(&bytes).map_err(|e| IndexError::Backend {
            item: entry.id.clone(),
            source: e,
        })?;
        if vector.dim() != dim {
            return Err(IndexError::DimensionMismatch {
                expected: dim,
                got: vector.dim(),
            });
        }
        entries.push(IndexEntry {
            knowledge_id: entry.id.clone(),
            vector,
        });
    }
    KnowledgeIndex::new(encoder.encoder_id().to_string(), dim, entries)
}
