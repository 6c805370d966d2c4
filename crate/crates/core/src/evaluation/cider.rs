//! Consensus-based TF-IDF similarity with a Gaussian length penalty.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::text::{ngram_counts, tokenize};

pub const CIDER_MAX_N: usize = 4;
pub const CIDER_SIGMA: f64 = 6.0;
pub const CIDER_SCALE: f64 = 10.0;

// Ordered so floating-point sums are reproducible across processes.
type Vector = BTreeMap<Vec<String>, f64>;

/// Document frequencies are taken over the reference sets of the whole
/// corpus: one document per (candidate, references) pair.
#[derive(Debug, Clone)]
pub struct CiderScorer {
    log_docs: f64,
    df: [HashMap<Vec<String>, usize>; CIDER_MAX_N],
}

fn norm(v: &Vector) -> f64 {
    v.values().map(|x| x * x).sum::<f64>().sqrt()
}

impl CiderScorer {
    pub fn new(reference_sets: &[Vec<&str>]) -> Self {
        let mut df: [HashMap<Vec<String>, usize>; CIDER_MAX_N] = Default::default();
        for refs in reference_sets {
            let tokenized: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r)).collect();
            for (n, table) in df.iter_mut().enumerate() {
                let seen: HashSet<&[String]> = tokenized.iter().flat_map(|t| ngram_counts(t, n + 1).into_keys()).collect();
                for g in seen {
                    *table.entry(g.to_vec()).or_insert(0) += 1;
                }
            }
        }
        Self {
            log_docs: (reference_sets.len() as f64).ln(),
            df,
        }
    }

    fn idf(&self, n: usize, g: &[String]) -> f64 {
        let df = self.df[n].get(g).copied().unwrap_or(0).max(1);
        self.log_docs - (df as f64).ln()
    }

    fn vector(&self, tokens: &[String], n: usize) -> Vector {
        ngram_counts(tokens, n + 1)
            .into_iter()
            .map(|(g, tf)| (g.to_vec(), tf as f64 * self.idf(n, g)))
            .collect()
    }

    /// Score of one candidate against its references, in [0, 10].
    pub fn score(&self, candidate: &str, references: &[&str]) -> f64 {
        if references.is_empty() {
            return 0.0;
        }
        let cand = tokenize(candidate);
        let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
        let mut total = 0.0;
        for n in 0..CIDER_MAX_N {
            let vc = self.vector(&cand, n);
            let nc = norm(&vc);
            let mut sum = 0.0;
            for r in &refs {
                let vr = self.vector(r, n);
                let nr = norm(&vr);
                if nc == 0.0 || nr == 0.0 {
                    continue;
                }
                let dot: f64 = vc.iter().filter_map(|(g, a)| vr.get(g).map(|b| a * b)).sum();
                let delta = cand.len() as f64 - r.len() as f64;
                let penalty = (-(delta * delta) / (2.0 * CIDER_SIGMA * CIDER_SIGMA)).exp();
                sum += dot / (nc * nr) * penalty;
            }
            total += sum / refs.len() as f64;
        }
        CIDER_SCALE * total / CIDER_MAX_N as f64
    }
}

/// Per-pair scores and their mean over a corpus of (candidate, references).
pub fn cider(corpus: &[(&str, Vec<&str>)]) -> Option<(f64, Vec<f64>)> {
    if corpus.is_empty() {
        return None;
    }
    let refs: Vec<Vec<&str>> = corpus.iter().map(|(_, r)| r.clone()).collect();
    let scorer = CiderScorer::new(&refs);
    let scores: Vec<f64> = corpus.iter().map(|(c, r)| scorer.score(c, r)).collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Some((mean, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn self_comparison_with_informative_idf() {
        let corpus = vec![
            ("red bollards line the road", vec!["red bollards line the road"]),
            ("a yellow plate on a car", vec!["a yellow plate on a car"]),
            ("snow poles and pine forest", vec!["snow poles and pine forest"]),
        ];
        let (mean, scores) = cider(&corpus).unwrap();
        for s in scores {
            assert!((s - 10.0).abs() < 1e-9, "{s}");
        }
        assert!((mean - 10.0).abs() < 1e-9);
    }

    #[test]
    fn single_pair_has_zero_idf() {
        // With one document every idf is log(1) - log(1) = 0.
        let (mean, _) = cider(&[("a b c", vec!["a b c"])]).unwrap();
        assert_eq!(mean, 0.0);
    }

    #[test]
    fn disjoint_is_zero() {
        let corpus = vec![("x y z", vec!["a b c"]), ("p q", vec!["d e"])];
        let (_, scores) = cider(&corpus).unwrap();
        assert_eq!(scores[0], 0.0);
        assert!(cider(&[]).is_none());
    }

    #[test]
    fn length_penalty_applies() {
        let corpus = vec![("a b", vec!["a b c d e f g h i j k l m n"]), ("z", vec!["y"])];
        let scorer = CiderScorer::new(&corpus.iter().map(|(_, r)| r.clone()).collect::<Vec<_>>());
        let s = scorer.score("a b", &["a b c d e f g h i j k l m n"]);
        assert!(s > 0.0 && s < 10.0);
    }

    fn sentence() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 0..10).prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn bounded_and_reference_order_free(
            pairs in prop::collection::vec((sentence(), sentence(), sentence()), 1..6)
        ) {
            let fwd: Vec<(&str, Vec<&str>)> = pairs.iter().map(|(c, a, b)| (c.as_str(), vec![a.as_str(), b.as_str()])).collect();
            let rev: Vec<(&str, Vec<&str>)> = pairs.iter().map(|(c, a, b)| (c.as_str(), vec![b.as_str(), a.as_str()])).collect();
            let (m1, s1) = cider(&fwd).unwrap();
            let (m2, s2) = cider(&rev).unwrap();
            prop_assert!((m1 - m2).abs() < 1e-9);
            for (a, b) in s1.iter().zip(&s2) {
                prop_assert!((a - b).abs() < 1e-9);
                prop_assert!((-1e-9..=10.0 + 1e-9).contains(a));
            }
        }
    }
}
