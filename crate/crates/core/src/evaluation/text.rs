//! Reference-based text metrics over the shared tokenizer.

use std::collections::{HashMap, HashSet};

/// Lowercases, splits on whitespace, and emits every character that is
/// neither alphanumeric nor whitespace as a token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            word.push(ch);
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            out.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

pub(crate) fn ngram_counts<'a>(tokens: &'a [String], n: usize) -> HashMap<&'a [String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

pub const BLEU_EPSILON: f64 = 1e-9;

/// Sentence BLEU with clipped multi-reference precisions for orders
/// `1..=n`, uniform weights, zero precisions replaced by [`BLEU_EPSILON`],
/// and a brevity penalty against the reference length closest to the
/// candidate length (shorter on ties). Empty candidates score 0.
pub fn bleu_n(candidate: &str, references: &[&str], n: usize) -> f64 {
    assert!((1..=4).contains(&n), "BLEU order must be 1..=4");
    let cand = tokenize(candidate);
    if cand.is_empty() || references.is_empty() {
        return 0.0;
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    let mut log_sum = 0.0;
    for k in 1..=n {
        let cand_counts = ngram_counts(&cand, k);
        let total: usize = cand_counts.values().sum();
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in &refs {
            for (g, c) in ngram_counts(r, k) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        let clipped: usize = cand_counts
            .iter()
            .map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
        let p = if clipped == 0 || total == 0 {
            BLEU_EPSILON
        } else {
            clipped as f64 / total as f64
        };
        log_sum += p.ln();
    }
    let c = cand.len();
    let r = refs
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| (len.abs_diff(c), len))
        .expect("at least one reference");
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    bp * (log_sum / n as f64).exp()
}

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub const ROUGE_BETA: f64 = 1.2;

/// LCS-based F-measure with beta 1.2, maximized over references.
pub fn rouge_l(candidate: &str, references: &[&str]) -> f64 {
    let cand = tokenize(candidate);
    if cand.is_empty() {
        return 0.0;
    }
    let b2 = ROUGE_BETA * ROUGE_BETA;
    references
        .iter()
        .map(|r| {
            let r = tokenize(r);
            let lcs = lcs_len(&cand, &r);
            if lcs == 0 {
                return 0.0;
            }
            let p = lcs as f64 / cand.len() as f64;
            let rec = lcs as f64 / r.len() as f64;
            (1.0 + b2) * p * rec / (rec + b2 * p)
        })
        .fold(0.0, f64::max)
}

pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_GAMMA: f64 = 0.5;
pub const METEOR_BETA: f64 = 3.0;
/// Search nodes per (candidate, reference) alignment before the best
/// alignment found so far is accepted.
pub const METEOR_NODE_BUDGET: usize = 200_000;

/// Exact-match unigram alignment: the maximum number of matches and, among
/// maximum alignments, the fewest chunks found within the node budget.
pub fn meteor_alignment(cand: &[String], reference: &[String]) -> (usize, usize) {
    let mut ref_positions: HashMap<&str, Vec<usize>> = HashMap::new();
    for (j, t) in reference.iter().enumerate() {
        ref_positions.entry(t.as_str()).or_default().push(j);
    }
    let mut cand_count: HashMap<&str, usize> = HashMap::new();
    for t in cand {
        *cand_count.entry(t.as_str()).or_insert(0) += 1;
    }
    // Every maximum alignment matches exactly min(count_c, count_r) tokens
    // of each type.
    let mut quota: HashMap<&str, usize> = HashMap::new();
    for (t, &c) in &cand_count {
        let r = ref_positions.get(t).map_or(0, Vec::len);
        if r > 0 {
            quota.insert(t, c.min(r));
        }
    }
    let matches: usize = quota.values().sum();
    if matches == 0 {
        return (0, 0);
    }

    struct Search<'a> {
        cand: &'a [String],
        ref_positions: HashMap<&'a str, Vec<usize>>,
        used: Vec<bool>,
        quota: HashMap<&'a str, usize>,
        remaining: HashMap<&'a str, usize>,
        best: usize,
        nodes: usize,
    }

    impl Search<'_> {
        fn go(&mut self, i: usize, prev: Option<usize>, chunks: usize) {
            self.nodes += 1;
            if chunks >= self.best || self.nodes > METEOR_NODE_BUDGET {
                return;
            }
            if i == self.cand.len() {
                self.best = chunks;
                return;
            }
            let t = self.cand[i].as_str();
            let need = self.quota.get(t).copied().unwrap_or(0);
            let left = self.remaining.get(t).copied().unwrap_or(0);
            *self.remaining.entry(t).or_insert(0) -= 1;
            if need > 0 {
                let positions = self.ref_positions[t].clone();
                // Try the position continuing the current chunk first.
                let mut order: Vec<usize> = positions.into_iter().filter(|&j| !self.used[j]).collect();
                if let Some(p) = prev {
                    if let Some(k) = order.iter().position(|&j| j == p + 1) {
                        order.swap(0, k);
                    }
                }
                for j in order {
                    let extends = prev.is_some_and(|p| p + 1 == j);
                    self.used[j] = true;
                    *self.quota.get_mut(t).unwrap() -= 1;
                    self.go(i + 1, Some(j), chunks + usize::from(!extends));
                    *self.quota.get_mut(t).unwrap() += 1;
                    self.used[j] = false;
                }
            }
            // Leave this token unmatched only if enough later occurrences
            // remain to fill the quota.
            if left > need {
                self.go(i + 1, None, chunks);
            }
            *self.remaining.get_mut(t).unwrap() += 1;
        }
    }

    let mut search = Search {
        cand,
        ref_positions,
        used: vec![false; reference.len()],
        quota,
        remaining: cand_count,
        best: usize::MAX,
        nodes: 0,
    };
    search.go(0, None, 0);
    if search.best == usize::MAX {
        // Budget exhausted before any complete alignment: one chunk per match
        // is always attainable.
        search.best = matches;
    }
    (matches, search.best)
}

/// Exact-match METEOR (no stemming or synonyms), maximized over references.
pub fn meteor(candidate: &str, references: &[&str]) -> f64 {
    let cand = tokenize(candidate);
    if cand.is_empty() {
        return 0.0;
    }
    references
        .iter()
        .map(|r| {
            let r = tokenize(r);
            let (m, chunks) = meteor_alignment(&cand, &r);
            if m == 0 {
                return 0.0;
            }
            let p = m as f64 / cand.len() as f64;
            let rec = m as f64 / r.len() as f64;
            let f_mean = p * rec / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * rec);
            let penalty = METEOR_GAMMA * (chunks as f64 / m as f64).powf(METEOR_BETA);
            f_mean * (1.0 - penalty)
        })
        .fold(0.0, f64::max)
}

/// Distinct n-grams over total n-grams, pooled across candidates. N-grams
/// never span two candidates. `None` when there are no n-grams at all.
pub fn dist_n(candidates: &[&str], n: usize) -> Option<f64> {
    assert!(n >= 1, "n must be positive");
    let mut distinct: HashSet<Vec<String>> = HashSet::new();
    let mut total = 0usize;
    for c in candidates {
        let tokens = tokenize(c);
        if tokens.len() < n {
            continue;
        }
        for g in tokens.windows(n) {
            total += 1;
            distinct.insert(g.to_vec());
        }
    }
    (total > 0).then(|| distinct.len() as f64 / total as f64)
}
