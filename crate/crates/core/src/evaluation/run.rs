//! Scoring a results file against the corpus and rendering the reports.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::accuracy::{accuracy, match_location, AccuracyReport, MatchMode, MatchResult, LEVELS};
use super::bertscore::BertScorer;
use super::cider::CiderScorer;
use super::fuzzy::{AliasTable, DEFAULT_THRESHOLD};
use super::text::{bleu_n, dist_n, meteor, rouge_l};
use super::EvaluationError;
use crate::backends::EncoderBackend;
use crate::corpus::Corpus;
use crate::reasoning::{PredictionRecord, PredictionStatus};

pub struct EvalConfig<'a> {
    pub mode: MatchMode,
    pub threshold: f64,
    pub aliases: AliasTable,
    /// When set, BERTScore is computed with this encoder's text embeddings.
    pub bertscore_encoder: Option<&'a dyn EncoderBackend>,
}

impl Default for EvalConfig<'_> {
    fn default() -> Self {
        Self {
            mode: MatchMode::Independent,
            threshold: DEFAULT_THRESHOLD,
            aliases: AliasTable::default_countries(),
            bertscore_encoder: None,
        }
    }
}

/// Corpus means of the sentence-level scores. Every value except `cider`
/// lies in [0, 1]; `cider` lies in [0, 10].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextMetricReport {
    pub n: u64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub meteor_exact: f64,
    /// `None` when the candidates hold no n-grams.
    pub dist1: Option<f64>,
    pub dist2: Option<f64>,
    pub bertscore: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDetail {
    pub sample_id: String,
    pub status: PredictionStatus,
    #[serde(rename = "match")]
    pub matched: MatchResult,
    pub bleu3: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub meteor_exact: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bertscore: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationOutput {
    pub mode: MatchMode,
    pub accuracy: AccuracyReport,
    pub text: TextMetricReport,
    pub details: Vec<SampleDetail>,
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

/// Joins predictions to their samples (all of a sample's explanations are
/// its references) and computes both reports plus per-sample details.
pub fn evaluate_run(
    predictions: &[PredictionRecord],
    corpus: &Corpus,
    cfg: &EvalConfig<'_>,
) -> Result<EvaluationOutput, EvaluationError> {
    if predictions.is_empty() {
        return Err(EvaluationError::EmptyEvaluationSet);
    }
    let mut seen = HashSet::new();
    let mut joined = Vec::with_capacity(predictions.len());
    for p in predictions {
        let sample = corpus
            .get(&p.sample_id)
            .ok_or_else(|| EvaluationError::UnknownSampleId(p.sample_id.clone()))?;
        if !seen.insert(p.sample_id.as_str()) {
            return Err(EvaluationError::DuplicatePrediction(p.sample_id.clone()));
        }
        let refs: Vec<&str> = sample.explanations.iter().map(String::as_str).collect();
        joined.push((p, sample, refs));
    }

    let reference_sets: Vec<Vec<&str>> = joined.iter().map(|(_, _, r)| r.clone()).collect();
    let cider = CiderScorer::new(&reference_sets);

    let mut details: Vec<SampleDetail> = joined
        .par_iter()
        .map(|(p, sample, refs)| {
            let cand = p.explanation.as_str();
            SampleDetail {
                sample_id: p.sample_id.clone(),
                status: p.status,
                matched: match_location(&p.location, &sample.location, &cfg.aliases, cfg.mode, cfg.threshold),
                bleu3: bleu_n(cand, refs, 3),
                bleu4: bleu_n(cand, refs, 4),
                rouge_l: rouge_l(cand, refs),
                cider: cider.score(cand, refs),
                meteor_exact: meteor(cand, refs),
                bertscore: None,
            }
        })
        .collect();

    let bertscore = match cfg.bertscore_encoder {
        None => None,
        Some(encoder) => {
            let mut scorer = BertScorer::new(encoder)?;
            for (d, (p, _, refs)) in details.iter_mut().zip(&joined) {
                d.bertscore = Some(scorer.score(&p.explanation, refs)?);
            }
            Some(mean(details.iter().filter_map(|d| d.bertscore), details.len()))
        }
    };

    let n = details.len();
    let candidates: Vec<&str> = predictions.iter().map(|p| p.explanation.as_str()).collect();
    let text = TextMetricReport {
        n: n as u64,
        bleu3: mean(details.iter().map(|d| d.bleu3), n),
        bleu4: mean(details.iter().map(|d| d.bleu4), n),
        rouge_l: mean(details.iter().map(|d| d.rouge_l), n),
        cider: mean(details.iter().map(|d| d.cider), n),
        meteor_exact: mean(details.iter().map(|d| d.meteor_exact), n),
        dist1: dist_n(&candidates, 1),
        dist2: dist_n(&candidates, 2),
        bertscore,
    };
    let matches: Vec<MatchResult> = details.iter().map(|d| d.matched).collect();
    Ok(EvaluationOutput {
        mode: cfg.mode,
        accuracy: accuracy(&matches)?,
        text,
        details,
    })
}

/// Presentation scale for [0, 1] quantities. CIDEr is always shown on its
/// raw 0 to 10 scale.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Unit,
    #[default]
    Percent,
}

impl Scale {
    fn factor(self) -> f64 {
        match self {
            Scale::Unit => 1.0,
            Scale::Percent => 100.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Scale::Unit => "fraction",
            Scale::Percent => "x100",
        }
    }
}

fn table(headers: &[&str], values: &[String]) -> String {
    let widths: Vec<usize> = headers.iter().zip(values).map(|(h, v)| h.len().max(v.len())).collect();
    let row = |cells: Vec<String>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    format!(
        "{}\n{}\n",
        row(headers.iter().map(|h| h.to_string()).collect()),
        row(values.to_vec())
    )
}

/// Aligned plain-text summary: location accuracy, then explanation metrics.
pub fn render_report(out: &EvaluationOutput, scale: Scale) -> String {
    let f = scale.factor();
    let fmt = |v: f64| format!("{:.2}", v * f);
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), fmt);
    let mode = match out.mode {
        MatchMode::Independent => "independent",
        MatchMode::Strict => "strict",
    };
    let mut s = String::new();
    let _ = writeln!(s, "Location accuracy ({mode} matching, n={}, {})", out.accuracy.n, scale.name());
    s += &table(&["Country", "State", "City", "Street"], &out.accuracy.fractions().map(fmt));
    s.push('\n');
    let t = &out.text;
    let _ = writeln!(s, "Explanation metrics (n={}, {}; CIDEr on raw 0-10 scale)", t.n, scale.name());
    let mut headers = vec!["BLEU_3", "BLEU_4", "ROUGE_L", "CIDEr(0-10)", "METEOR_exact", "Dist-1", "Dist-2"];
    let mut values = vec![
        fmt(t.bleu3),
        fmt(t.bleu4),
        fmt(t.rouge_l),
        format!("{:.2}", t.cider),
        fmt(t.meteor_exact),
        opt(t.dist1),
        opt(t.dist2),
    ];
    if let Some(b) = t.bertscore {
        headers.push("BERTScore");
        values.push(fmt(b));
    }
    s += &table(&headers, &values);
    s
}

/// Machine-readable summary: one accuracy line and one text-metric line,
/// values unscaled.
pub fn report_records(out: &EvaluationOutput, scale: Scale) -> Vec<serde_json::Value> {
    let a = &out.accuracy;
    let mut acc = json!({ "kind": "accuracy", "mode": out.mode, "n": a.n });
    for (i, level) in LEVELS.iter().enumerate() {
        acc[*level] = json!(a.fraction(i));
        acc[format!("{level}_matched")] = json!(a.matched[i]);
    }
    let mut text = serde_json::to_value(&out.text).expect("report serializes");
    text["kind"] = json!("text_metrics");
    text["cider_scale"] = json!("0-10");
    text["meteor_variant"] = json!("exact");
    text["bleu_aggregation"] = json!("mean_sentence");
    text["presentation_scale"] = json!(scale);
    vec![acc, text]
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("record serializes") + "\n")
        .collect()
}

pub const REPORT_FILE: &str = "report.jsonl";
pub const DETAILS_FILE: &str = "details.jsonl";
pub const TABLE_FILE: &str = "report.txt";

/// Writes `report.jsonl`, `details.jsonl` and `report.txt` into `dir`.
pub fn write_reports(dir: &Path, out: &EvaluationOutput, scale: Scale) -> Result<(), EvaluationError> {
    let io = |path: &Path, e: std::io::Error| EvaluationError::Io {
        path: path.display().to_string(),
        source: e,
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    for (name, body) in [
        (REPORT_FILE, jsonl(&report_records(out, scale))),
        (DETAILS_FILE, jsonl(&out.details)),
        (TABLE_FILE, render_report(out, scale)),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
    }
    Ok(())
}
