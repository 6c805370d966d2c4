//! Stage three: prompt assembly, generation and answer parsing, plus the
//! per-sample pipeline driver.

mod answer;
mod pipeline;
mod prompt;
mod thumbnail;

use thiserror::Error;

pub use answer::{format_answer, parse_answer, ParseFailure, ParsedAnswer};
pub use pipeline::{
    run_batch, run_pipeline, Backends, ImageMode, Mode, PipelineContext, PipelineResources, PipelineSettings,
    PredictionRecord, PredictionStatus, Provenance, Stages,
};
pub use prompt::{
    assemble_prompt, dedup_in_order, ImagePrompt, TemplateRegistry, TextPrompt, ANSWER_FORMAT, DEFAULT_TEMPLATE_ID,
};
pub use thumbnail::{concat_strip, encode_png, make_thumbnail, montage, select_views, Thumbnail, ThumbnailParams};

#[derive(Debug, Error)]
pub enum ReasoningError {
    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),
    #[error("invalid prompt template `{id}`: {reason}")]
    InvalidTemplate { id: String, reason: String },
    #[error("empty panorama")]
    EmptyPanorama,
    #[error("cannot decode image `{image}`: {reason}")]
    ImageDecode { image: String, reason: String },
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
