//! Location accuracy and explanation text metrics.

mod accuracy;
mod bertscore;
mod cider;
mod fuzzy;
mod run;
mod text;

use thiserror::Error;

pub use accuracy::{accuracy, match_location, AccuracyReport, MatchMode, MatchResult, LEVELS};
pub use bertscore::BertScorer;
pub use cider::{cider, CiderScorer, CIDER_MAX_N, CIDER_SCALE, CIDER_SIGMA};
pub use fuzzy::{canonicalize, fuzzy_match, AliasTable, DEFAULT_THRESHOLD};
pub use run::{
    evaluate_run, render_report, report_records, write_reports, EvalConfig, EvaluationOutput, SampleDetail, Scale,
    TextMetricReport, DETAILS_FILE, REPORT_FILE, TABLE_FILE,
};
pub use text::{
    bleu_n, dist_n, lcs_len, meteor, meteor_alignment, rouge_l, tokenize, BLEU_EPSILON, METEOR_ALPHA, METEOR_BETA,
    METEOR_GAMMA, ROUGE_BETA,
};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("empty evaluation set")]
    EmptyEvaluationSet,
    #[error("prediction for unknown sample `{0}`")]
    UnknownSampleId(String),
    #[error("more than one prediction for sample `{0}`")]
    DuplicatePrediction(String),
    #[error("alias table: {0}")]
    AliasTable(String),
    #[error("backend: {0}")]
    Backend(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
