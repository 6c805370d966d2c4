//! Tolerant place-name comparison: canonicalization, aliases, and a
//! normalized edit-distance threshold.

use std::collections::BTreeMap;
use std::path::Path;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use super::EvaluationError;

pub const DEFAULT_THRESHOLD: f64 = 0.85;

const DEFAULT_ALIASES: &str = include_str!("../../data/country_aliases.txt");

/// Lowercase, strip diacritics, turn punctuation into spaces and collapse
/// whitespace.
pub fn canonicalize(text: &str) -> String {
    let folded: String = text
        .to_lowercase()
        .nfd()
        .filter(|c| !is_combining_mark(*c))
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Canonical name to aliases. Keys and aliases are stored canonicalized.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasTable {
    to_canonical: BTreeMap<String, String>,
}

impl AliasTable {
    /// Parses `canonical:alias` lines. Blank lines and `#` comments are
    /// skipped. An alias may belong to one canonical name only.
    pub fn parse(text: &str) -> Result<Self, EvaluationError> {
        let mut table = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((canonical, alias)) = line.split_once(':') else {
                return Err(EvaluationError::AliasTable(format!("line {}: expected `canonical:alias`", no + 1)));
            };
            let (canonical, alias) = (canonicalize(canonical), canonicalize(alias));
            if canonical.is_empty() || alias.is_empty() {
                return Err(EvaluationError::AliasTable(format!("line {}: empty name", no + 1)));
            }
            table.insert(&canonical, &alias).map_err(|e| EvaluationError::AliasTable(format!("line {}: {e}", no + 1)))?;
        }
        Ok(table)
    }

    pub fn from_file(path: &Path) -> Result<Self, EvaluationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EvaluationError::AliasTable(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The shipped country-name table.
    pub fn default_countries() -> Self {
        Self::parse(DEFAULT_ALIASES).expect("bundled alias table is valid")
    }

    fn insert(&mut self, canonical: &str, alias: &str) -> Result<(), String> {
        for (name, target) in [(canonical, canonical), (alias, canonical)] {
            match self.to_canonical.get(name) {
                Some(existing) if existing != target => {
                    return Err(format!("`{name}` already maps to `{existing}`"));
                }
                _ => {
                    self.to_canonical.insert(name.to_string(), target.to_string());
                }
            }
        }
        Ok(())
    }

    /// Merges `other` into `self` with the same disjointness rule.
    pub fn extend(&mut self, other: &AliasTable) -> Result<(), EvaluationError> {
        for (alias, canonical) in &other.to_canonical {
            self.insert(canonical, alias).map_err(EvaluationError::AliasTable)?;
        }
        Ok(())
    }

    pub fn resolve<'a>(&'a self, canonical_text: &'a str) -> &'a str {
        self.to_canonical.get(canonical_text).map_or(canonical_text, String::as_str)
    }

    pub fn len(&self) -> usize {
        self.to_canonical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_canonical.is_empty()
    }
}

/// True when both sides canonicalize (through `aliases`) to the same string
/// or their normalized Levenshtein similarity reaches `threshold`. An empty
/// candidate never matches.
pub fn fuzzy_match(candidate: &str, truth: &str, aliases: &AliasTable, threshold: f64) -> bool {
    let c = canonicalize(candidate);
    if c.is_empty() {
        return false;
    }
    let t = canonicalize(truth);
    let (c, t) = (aliases.resolve(&c), aliases.resolve(&t));
    c == t || strsim::normalized_levenshtein(c, t) >= threshold
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_forms() {
        assert_eq!(canonicalize("  Paraná "), "parana");
        assert_eq!(canonicalize("Côte d'Ivoire"), "cote d ivoire");
        assert_eq!(canonicalize("São\tPaulo!!"), "sao paulo");
        assert_eq!(canonicalize(""), "");
    }

    #[test]
    fn examples() {
        let t = AliasTable::default_countries();
        assert!(fuzzy_match("USA", "United States", &t, DEFAULT_THRESHOLD));
        assert!(fuzzy_match("United States", "usa", &t, DEFAULT_THRESHOLD));
        assert!(!fuzzy_match("", "France", &t, DEFAULT_THRESHOLD));
        assert!(!fuzzy_match("", "", &t, DEFAULT_THRESHOLD));
        assert!(fuzzy_match("Parana", "Paraná", &t, DEFAULT_THRESHOLD));
        assert!(!fuzzy_match("Peru", "Chile", &t, DEFAULT_THRESHOLD));
        // One typo in a long name stays above 0.85.
        assert!(fuzzy_match("Michigann", "Michigan", &t, DEFAULT_THRESHOLD));
    }

    #[test]
    fn bundled_table_shape() {
        let t = AliasTable::default_countries();
        let canonicals: std::collections::BTreeSet<_> = t.to_canonical.values().collect();
        let aliases = t.len() - canonicals.len();
        assert!(aliases >= 60, "{aliases}");
        assert_eq!(t.resolve("uk"), "united kingdom");
    }

    #[test]
    fn aliases_must_be_disjoint() {
        assert!(AliasTable::parse("a:x\nb:x").is_err());
        assert!(AliasTable::parse("a:b\nb:c").is_err());
        assert!(AliasTable::parse("a:x\na:y\n# c\n\n").is_ok());
        assert!(AliasTable::parse("no separator").is_err());
    }
}
