//! Hierarchical location accuracy.

use serde::{Deserialize, Serialize};

use super::fuzzy::{fuzzy_match, AliasTable};
use super::EvaluationError;
use crate::corpus::LocationLabel;

pub const LEVELS: [&str; 4] = ["country", "state", "city", "street"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Each level is judged on its own.
    #[default]
    Independent,
    /// A level only counts when every coarser level matched too.
    Strict,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub country: bool,
    pub state: bool,
    pub city: bool,
    pub street: bool,
}

impl MatchResult {
    pub fn levels(&self) -> [bool; 4] {
        [self.country, self.state, self.city, self.street]
    }

    pub fn from_levels([country, state, city, street]: [bool; 4]) -> Self {
        Self {
            country,
            state,
            city,
            street,
        }
    }
}

pub fn match_location(
    candidate: &LocationLabel,
    truth: &LocationLabel,
    aliases: &AliasTable,
    mode: MatchMode,
    threshold: f64,
) -> MatchResult {
    let c = candidate.levels();
    let t = truth.levels();
    let mut out = [false; 4];
    for i in 0..4 {
        out[i] = fuzzy_match(c[i], t[i], aliases, threshold);
        if mode == MatchMode::Strict && i > 0 {
            out[i] &= out[i - 1];
        }
    }
    MatchResult::from_levels(out)
}

/// Matched counts per level over `n` records; fractions are derived from
/// the integer counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub n: u64,
    pub matched: [u64; 4],
}

impl AccuracyReport {
    pub fn fraction(&self, level: usize) -> f64 {
        self.matched[level] as f64 / self.n as f64
    }

    pub fn fractions(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|i| self.fraction(i))
    }

    pub fn country(&self) -> f64 {
        self.fraction(0)
    }

    pub fn state(&self) -> f64 {
        self.fraction(1)
    }

    pub fn city(&self) -> f64 {
        self.fraction(2)
    }

    pub fn street(&self) -> f64 {
        self.fraction(3)
    }
}

pub fn accuracy(results: &[MatchResult]) -> Result<AccuracyReport, EvaluationError> {
    if results.is_empty() {
        return Err(EvaluationError::EmptyEvaluationSet);
    }
    let mut matched = [0u64; 4];
    for r in results {
        for (m, hit) in matched.iter_mut().zip(r.levels()) {
            *m += u64::from(hit);
        }
    }
    Ok(AccuracyReport {
        n: results.len() as u64,
        matched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::fuzzy::DEFAULT_THRESHOLD;
    use proptest::prelude::*;

    fn full(c: &str, s: &str, ci: &str, st: &str) -> LocationLabel {
        LocationLabel::new(c).with_state(s).with_city(ci).with_street(st)
    }

    #[test]
    fn modes() {
        let t = AliasTable::default_countries();
        let truth = full("Brazil", "Parana", "Curitiba", "Rua XV");
        assert_eq!(
            match_location(&truth, &truth, &t, MatchMode::Independent, DEFAULT_THRESHOLD).levels(),
            [true; 4]
        );
        let cand = full("Brazil", "Santa Catarina", "Curitiba", "Rua XV");
        assert_eq!(
            match_location(&cand, &truth, &t, MatchMode::Independent, DEFAULT_THRESHOLD).levels(),
            [true, false, true, true]
        );
        assert_eq!(
            match_location(&cand, &truth, &t, MatchMode::Strict, DEFAULT_THRESHOLD).levels(),
            [true, false, false, false]
        );
        let empty = LocationLabel { country: String::new(), state: None, city: None, street: None };
        assert_eq!(match_location(&empty, &truth, &t, MatchMode::Independent, DEFAULT_THRESHOLD).levels(), [false; 4]);
    }

    #[test]
    fn counts() {
        let r = |c| MatchResult { country: c, ..Default::default() };
        let report = accuracy(&[r(true), r(false), r(true), r(false)]).unwrap();
        assert_eq!(report.country(), 0.5);
        assert_eq!(report.matched, [2, 0, 0, 0]);
        let all = accuracy(&[MatchResult::from_levels([true; 4]); 3]).unwrap();
        assert_eq!(all.fractions(), [1.0; 4]);
        assert!(matches!(accuracy(&[]), Err(EvaluationError::EmptyEvaluationSet)));
    }

    #[test]
    fn eight_record_fixture() {
        let rows = [
            [true, true, true, true],
            [true, true, false, false],
            [true, false, false, true],
            [false, false, false, false],
            [true, true, true, false],
            [true, false, true, false],
            [false, true, false, false],
            [true, true, false, false],
        ];
        let report = accuracy(&rows.map(MatchResult::from_levels)).unwrap();
        assert_eq!(report.matched, [6, 5, 3, 2]);
        assert_eq!(report.fractions(), [0.75, 0.625, 0.375, 0.25]);
    }

    proptest! {
        #[test]
        fn monotone_and_strict_ordering(rows in prop::collection::vec(any::<[bool; 4]>(), 1..50)) {
            let results: Vec<MatchResult> = rows.iter().copied().map(MatchResult::from_levels).collect();
            let before = accuracy(&results).unwrap();
            let mut more = results.clone();
            more.push(MatchResult::from_levels([true; 4]));
            let after = accuracy(&more).unwrap();
            for i in 0..4 {
                prop_assert!(after.fraction(i) >= before.fraction(i));
            }
            let strict: Vec<MatchResult> = rows
                .iter()
                .map(|r| {
                    let mut s = *r;
                    for i in 1..4 { s[i] &= s[i - 1]; }
                    MatchResult::from_levels(s)
                })
                .collect();
            let f = accuracy(&strict).unwrap().fractions();
            prop_assert!(f[3] <= f[2] && f[2] <= f[1] && f[1] <= f[0]);
        }
    }
}
