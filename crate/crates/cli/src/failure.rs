use georeason_core::corpus::CorpusError;
use georeason_core::detection::DetectionError;
use georeason_core::evaluation::EvaluationError;
use georeason_core::index::IndexError;
use georeason_core::reasoning::ReasoningError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Config = 1,
    Data = 2,
    Backend = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub code: ExitCode,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: ExitCode, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }

    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self::new(ExitCode::Config, error)
    }

    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        Self::new(ExitCode::Data, error)
    }

    pub fn backend(error: impl Into<anyhow::Error>) -> Self {
        Self::new(ExitCode::Backend, error)
    }
}

pub fn corpus(e: CorpusError) -> Failure {
    match e {
        CorpusError::ManifestNotFound(_) | CorpusError::Io { .. } => Failure::backend(e),
        CorpusError::HeaderViolation(_) | CorpusError::SchemaViolation { .. } | CorpusError::DuplicateId(_) => {
            Failure::data(e)
        }
    }
}

pub fn index(e: IndexError) -> Failure {
    match e {
        IndexError::Backend { .. } | IndexError::Io { .. } | IndexError::DimensionMismatch { .. } => {
            Failure::backend(e)
        }
        IndexError::EncoderMismatch { .. } => Failure::config(e),
        _ => Failure::data(e),
    }
}

pub fn detection(e: DetectionError) -> Failure {
    match e {
        DetectionError::Io { .. } | DetectionError::Backend { .. } => Failure::backend(e),
        _ => Failure::data(e),
    }
}

pub fn reasoning(e: ReasoningError) -> Failure {
    match e {
        ReasoningError::Io { .. } => Failure::backend(e),
        _ => Failure::config(e),
    }
}

pub fn evaluation(e: EvaluationError) -> Failure {
    match e {
        EvaluationError::AliasTable(_) => Failure::config(e),
        EvaluationError::Backend(_) | EvaluationError::Io { .. } => Failure::backend(e),
        _ => Failure::data(e),
    }
}
