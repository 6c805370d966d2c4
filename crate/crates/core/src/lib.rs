//! Street-view geolocation reasoning pipeline.
//!
//! The pipeline runs in three stages over a corpus of panoramas:
//!
//! 1. [`detection`]: fine-grained visual clues are detected in every panorama
//!    image by an open-vocabulary detector and cropped.
//! 2. [`index`]: clue crops are matched against a country-specific knowledge
//!    base by exact top-k cosine similarity over (knowledge, clue) pairs.
//! 3. [`reasoning`]: a thumbnail montage, the selected clue crops and the
//!    matching knowledge snippets are assembled into a prompt for a generator
//!    whose answer is parsed into a hierarchical location and an explanation.
//!
//! All neural models sit behind the traits in [`backends`], which also ships
//! deterministic mocks. [`evaluation`] scores predictions with hierarchical
//! location accuracy and reference-based text metrics.

pub mod backends;
pub mod corpus;
pub mod detection;
pub mod digest;
pub mod evaluation;
pub mod index;
pub mod reasoning;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

pub use backends::{BackendError, DetectorBackend, EncoderBackend, GeneratorBackend};
pub use corpus::{Continent, Corpus, CorpusError, GeoSample, KnowledgeBase, KnowledgeEntry, LocationLabel};
pub use detection::{BoundingBox, DetectionParams, DetectionPromptVocabulary, VisualClue};
pub use evaluation::{AccuracyReport, MatchMode, MatchResult, TextMetricReport};
pub use index::{EmbeddingVector, KnowledgeIndex, RetrievalResult};
pub use reasoning::{PredictionRecord, PredictionStatus};
