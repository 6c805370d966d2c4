//! `PLACE {COUNTRY, STATE, CITY, STREET}. EXPLANATION.` rendering and parsing.

use serde::{Deserialize, Serialize};

use crate::corpus::LocationLabel;

const KEYWORD: &str = "PLACE";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    /// Missing levels are `None`; a missing country is the empty string.
    pub location: LocationLabel,
    pub explanation: String,
    /// True when the `PLACE` scaffold was absent and the first brace group
    /// was used instead.
    pub via_fallback: bool,
}

/// Neither the scaffold nor a usable brace group was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFailure {
    pub raw: String,
}

impl std::fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "no location answer found in generator output ({} bytes)", self.raw.len())
    }
}

impl std::error::Error for ParseFailure {}

pub fn format_answer(location: &LocationLabel, explanation: &str) -> String {
    let [country, state, city, street] = location.levels();
    let explanation = explanation.trim();
    if explanation.is_empty() {
        format!("{KEYWORD} {{{country}, {state}, {city}, {street}}}.")
    } else {
        format!("{KEYWORD} {{{country}, {state}, {city}, {street}}}. {explanation}")
    }
}

fn label_from(items: &[&str]) -> LocationLabel {
    let field = |i: usize| {
        items
            .get(i)
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(str::to_string)
    };
    LocationLabel {
        country: field(0).unwrap_or_default(),
        state: field(1),
        city: field(2),
        street: field(3),
    }
}

fn remainder(rest: &str) -> String {
    rest.strip_prefix('.').unwrap_or(rest).trim().to_string()
}

/// Scaffold: `PLACE`, optional whitespace, `{` four comma separated fields
/// `}`, optional `.`, then the explanation.
fn parse_scaffold(raw: &str) -> Option<ParsedAnswer> {
    for (at, _) in raw.match_indices(KEYWORD) {
        let after = raw[at + KEYWORD.len()..].trim_start();
        let Some(body) = after.strip_prefix('{') else {
            continue;
        };
        let Some(close) = body.find('}') else {
            continue;
        };
        let inner = &body[..close];
        if inner.contains('{') {
            continue;
        }
        let items: Vec<&str> = inner.split(',').collect();
        if items.len() != 4 {
            continue;
        }
        return Some(ParsedAnswer {
            location: label_from(&items),
            explanation: remainder(&body[close + 1..]),
            via_fallback: false,
        });
    }
    None
}

/// First `{...}` group without nested braces holding 1 to 4 comma
/// separated items, at least one of them non-empty.
fn parse_fallback(raw: &str) -> Option<ParsedAnswer> {
    for (open, _) in raw.match_indices('{') {
        let body = &raw[open + 1..];
        let Some(close) = body.find('}') else {
            return None;
        };
        let inner = &body[..close];
        if inner.contains('{') {
            continue;
        }
        let items: Vec<&str> = inner.split(',').collect();
        if items.len() > 4 || items.iter().all(|s| s.trim().is_empty()) {
            continue;
        }
        return Some(ParsedAnswer {
            location: label_from(&items),
            explanation: remainder(&body[close + 1..]),
            via_fallback: true,
        });
    }
    None
}

/// Total over all inputs: returns the parsed answer or a soft failure that
/// carries `raw` verbatim.
pub fn parse_answer(raw: &str) -> Result<ParsedAnswer, ParseFailure> {
    parse_scaffold(raw)
        .or_else(|| parse_fallback(raw))
        .ok_or_else(|| ParseFailure { raw: raw.to_string() })
}
