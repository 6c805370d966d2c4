use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::DetectionError;
use crate::digest::{sha256_hex, PartHasher};

const DEFAULT_VOCABULARY: &str = include_str!("../../data/default_vocabulary.txt");
const STOPLIST: &str = include_str!("../../data/vocab_stoplist.txt");

pub const MAX_TERM_WORDS: usize = 4;
const MIN_TOKEN_CHARS: usize = 3;

/// Ordered term list handed to the open-vocabulary detector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionPromptVocabulary {
    pub terms: Vec<String>,
    /// SHA-256 of the text the vocabulary was derived from.
    pub source_hash: String,
}

fn stoplist() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPLIST
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

impl DetectionPromptVocabulary {
    /// Builds a vocabulary from explicit terms, lowercasing them and checking
    /// uniqueness and length.
    pub fn from_terms<I, S>(terms: I, source_hash: String) -> Result<Self, DetectionError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let terms: Vec<String> = terms
            .into_iter()
            .map(|t| t.as_ref().split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
            .collect();
        let vocab = Self { terms, source_hash };
        vocab.validate()?;
        Ok(vocab)
    }

    /// The bundled general-purpose vocabulary.
    pub fn default_terms() -> Self {
        let terms = DEFAULT_VOCABULARY.lines().filter(|l| !l.trim().is_empty());
        Self::from_terms(terms, sha256_hex(DEFAULT_VOCABULARY.as_bytes()))
            .expect("bundled vocabulary is valid")
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        let mut seen = HashSet::new();
        for term in &self.terms {
            let words = term.split_whitespace().count();
            if words == 0 || words > MAX_TERM_WORDS {
                return Err(DetectionError::InvalidVocabulary(format!(
                    "term `{term}` must have 1 to {MAX_TERM_WORDS} words"
                )));
            }
            if *term != term.to_lowercase() {
                return Err(DetectionError::InvalidVocabulary(format!("term `{term}` is not lowercase")));
            }
            if !seen.insert(term.as_str()) {
                return Err(DetectionError::InvalidVocabulary(format!("duplicate term `{term}`")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.iter().any(|t| t == term)
    }

    pub fn load(path: &Path) -> Result<Self, DetectionError> {
        let text = std::fs::read_to_string(path).map_err(|e| DetectionError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let vocab: Self = serde_json::from_str(&text)
            .map_err(|e| DetectionError::InvalidVocabulary(e.to_string()))?;
        vocab.validate()?;
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<(), DetectionError> {
        let text = serde_json::to_string_pretty(self).expect("vocabulary serializes");
        std::fs::write(path, text + "\n").map_err(|e| DetectionError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }
}

/// Candidate noun tokens of `text`: lowercase, punctuation replaced by
/// spaces, then stopwords, short tokens (< 3 chars), tokens without a
/// letter, and the bundled verb/function-word/adjective list removed.
pub fn candidate_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    let stop = stoplist();
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .filter(move |t| {
            t.chars().count() >= MIN_TOKEN_CHARS
                && t.chars().any(char::is_alphabetic)
                && !stop.contains(t.as_str())
        })
}

/// Most frequent candidate nouns over explanations and knowledge snippets.
/// Ties are broken lexicographically.
pub fn build_prompt_vocabulary(
    explanations: &[String],
    snippets: &[String],
    top_n: usize,
) -> Result<DetectionPromptVocabulary, DetectionError> {
    if top_n == 0 {
        return Err(DetectionError::InvalidVocabulary("top_n must be at least 1".into()));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for text in explanations.iter().chain(snippets) {
        for token in candidate_tokens(text) {
            *counts.entry(token).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(DetectionError::EmptyCorpusText);
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(top_n);

    let mut hasher = PartHasher::new();
    hasher.str("explanations").part(&(explanations.len() as u64).to_le_bytes());
    for e in explanations {
        hasher.str(e);
    }
    hasher.str("snippets").part(&(snippets.len() as u64).to_le_bytes());
    for s in snippets {
        hasher.str(s);
    }
    DetectionPromptVocabulary::from_terms(ranked.into_iter().map(|(t, _)| t), hasher.finish_hex())
}
