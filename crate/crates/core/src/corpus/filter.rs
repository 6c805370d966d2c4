//! Explanation filtering: score threshold, English detection and removal of
//! explanations that rely on non-reasoning factors.

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::CorpusError;

pub const DEFAULT_MIN_SCORE: i64 = 4000;
pub const MAX_SCORE: i64 = 5000;

const ENGLISH_WORDS: &str = include_str!("../../data/english_words.txt");
const NON_REASONING_PHRASES: &str = include_str!("../../data/non_reasoning_phrases.txt");

/// An explanation as scraped, with the game score its author reported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawExplanationRecord {
    pub text: String,
    pub score: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language_hint: Option<String>,
}

impl RawExplanationRecord {
    pub fn new(text: impl Into<String>, score: i64) -> Self {
        Self {
            text: text.into(),
            score,
            language_hint: None,
        }
    }
}

pub trait LanguageDetector: Send + Sync {
    fn is_english(&self, text: &str) -> bool;
}

/// Character/word-list heuristic: at least `min_ascii` of all characters are
/// ASCII and at least `min_known` of the word tokens appear in the bundled
/// English word list. Tokens are whitespace-split, lowercased and trimmed of
/// non-alphanumeric edges; purely numeric or empty tokens are not counted.
#[derive(Debug, Clone)]
pub struct EnglishHeuristic {
    words: &'static HashSet<&'static str>,
    pub min_ascii: f64,
    pub min_known: f64,
}

fn english_words() -> &'static HashSet<&'static str> {
    static WORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    WORDS.get_or_init(|| ENGLISH_WORDS.lines().map(str::trim).filter(|w| !w.is_empty()).collect())
}

impl Default for EnglishHeuristic {
    fn default() -> Self {
        Self {
            words: english_words(),
            min_ascii: 0.9,
            min_known: 0.6,
        }
    }
}

impl LanguageDetector for EnglishHeuristic {
    fn is_english(&self, text: &str) -> bool {
        let total = text.chars().count();
        if total == 0 {
            return false;
        }
        let ascii = text.chars().filter(char::is_ascii).count();
        if (ascii as f64) < self.min_ascii * total as f64 {
            return false;
        }
        let mut counted = 0usize;
        let mut known = 0usize;
        for token in text.split_whitespace() {
            let word = token
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase();
            if word.is_empty() || word.chars().all(|c| c.is_numeric()) {
                continue;
            }
            counted += 1;
            if self.words.contains(word.as_str()) {
                known += 1;
            }
        }
        counted > 0 && known as f64 >= self.min_known * counted as f64
    }
}

/// Case-insensitive substring blacklist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseBlacklist {
    phrases: Vec<String>,
}

impl Default for PhraseBlacklist {
    fn default() -> Self {
        Self::parse(NON_REASONING_PHRASES)
    }
}

impl PhraseBlacklist {
    /// One phrase per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let mut phrases: Vec<String> = text
            .lines()
            .map(|l| normalize_spaces(&l.trim().to_lowercase()))
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        phrases.dedup();
        Self { phrases }
    }

    pub fn from_file(path: &Path) -> Result<Self, CorpusError> {
        if !path.is_file() {
            return Err(CorpusError::ManifestNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    pub fn matches(&self, text: &str) -> bool {
        let haystack = normalize_spaces(&text.to_lowercase().replace('\u{2019}', "'"));
        self.phrases.iter().any(|p| haystack.contains(p.as_str()))
    }
}

fn normalize_spaces(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub struct ExplanationFilter {
    pub language: Box<dyn LanguageDetector>,
    pub blacklist: PhraseBlacklist,
}

impl Default for ExplanationFilter {
    fn default() -> Self {
        Self {
            language: Box::new(EnglishHeuristic::default()),
            blacklist: PhraseBlacklist::default(),
        }
    }
}

impl ExplanationFilter {
    pub fn keeps(&self, record: &RawExplanationRecord, min_score: i64) -> bool {
        record.score >= min_score
            && self.language.is_english(&record.text)
            && !self.blacklist.matches(&record.text)
    }

    /// Texts of the records that pass all three rules, in input order.
    pub fn filter(&self, records: &[RawExplanationRecord], min_score: i64) -> Vec<String> {
        records
            .iter()
            .filter(|r| self.keeps(r, min_score))
            .map(|r| r.text.clone())
            .collect()
    }
}

/// [`ExplanationFilter::filter`] with the bundled heuristics.
pub fn filter_explanations(records: &[RawExplanationRecord], min_score: i64) -> Vec<String> {
    ExplanationFilter::default().filter(records, min_score)
}
