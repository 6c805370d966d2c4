//! Exact top-k search over the (knowledge, clue) cross product.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{cosine, EmbeddingVector, IndexError, KnowledgeIndex};
use crate::backends::EncoderBackend;
use crate::corpus::KnowledgeBase;
use crate::detection::VisualClue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalOptions {
    pub k: usize,
    /// Keep only the best pair per knowledge entry.
    pub distinct_knowledge: bool,
}

impl Default for RetrievalOptions {
    fn default() -> Self {
        Self {
            k: 3,
            distinct_knowledge: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalPair {
    pub knowledge_id: String,
    pub clue_id: String,
    pub score: f64,
}

/// Selected pairs in descending score order. `snippets[m]` and `clues[m]`
/// belong to `pairs[m]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub pairs: Vec<RetrievalPair>,
    pub snippets: Vec<String>,
    pub clues: Vec<String>,
}

impl RetrievalResult {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Score of knowledge entry `knowledge` against clue `clue`, both as
/// positions in their input order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub knowledge: usize,
    pub clue: usize,
    pub score: f64,
}

fn rank(a: &ScoredPair, b: &ScoredPair) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.knowledge.cmp(&b.knowledge))
        .then(a.clue.cmp(&b.clue))
}

/// Sorts every pair by score descending, then knowledge position, then clue
/// position, and keeps the first `k`.
pub fn select_top_pairs(mut pairs: Vec<ScoredPair>, k: usize, distinct_knowledge: bool) -> Vec<ScoredPair> {
    pairs.sort_by(rank);
    if distinct_knowledge {
        let mut seen = std::collections::HashSet::new();
        pairs.retain(|p| seen.insert(p.knowledge));
    }
    pairs.truncate(k);
    pairs
}

/// Embeds each clue crop with `encoder` and returns the `opts.k`
/// best-scoring (knowledge, clue) pairs. A knowledge entry may appear in
/// several pairs unless `opts.distinct_knowledge` is set.
pub fn retrieve_topk(
    index: &KnowledgeIndex,
    kb: &KnowledgeBase,
    clues: &[VisualClue],
    encoder: &dyn EncoderBackend,
    opts: &RetrievalOptions,
) -> Result<RetrievalResult, IndexError> {
    if index.encoder_id != encoder.encoder_id() {
        return Err(IndexError::EncoderMismatch {
            index: index.encoder_id.clone(),
            encoder: encoder.encoder_id().to_string(),
        });
    }
    if opts.k == 0 {
        return Err(IndexError::Build("k must be at least 1".into()));
    }
    if clues.is_empty() || index.is_empty() {
        return Ok(RetrievalResult::default());
    }
    let mut clue_vectors: Vec<EmbeddingVector> = Vec::with_capacity(clues.len());
    for clue in clues {
        let bytes = std::fs::read(&clue.crop).map_err(|e| IndexError::Io {
            path: clue.crop.display().to_string(),
            source: e,
        })?;
        let v = encoder.embed_image(&bytes).map_err(|e| IndexError::Backend {
            item: clue.id.clone(),
            source: e,
        })?;
        if v.dim() != index.dim {
            return Err(IndexError::DimensionMismatch {
                expected: index.dim,
                got: v.dim(),
            });
        }
        clue_vectors.push(v);
    }
    let mut scored = Vec::with_capacity(index.len() * clues.len());
    for (ki, entry) in index.entries.iter().enumerate() {
        for (ci, cv) in clue_vectors.iter().enumerate() {
            scored.push(ScoredPair {
                knowledge: ki,
                clue: ci,
                score: cosine(&entry.vector, cv)?,
            });
        }
    }
    let mut result = RetrievalResult::default();
    for p in select_top_pairs(scored, opts.k, opts.distinct_knowledge) {
        let knowledge_id = &index.entries[p.knowledge].knowledge_id;
        let snippet = kb
            .get(knowledge_id)
            .ok_or_else(|| IndexError::Build(format!("index entry `{knowledge_id}` is not in the knowledge base")))?
            .snippet
            .clone();
        result.pairs.push(RetrievalPair {
            knowledge_id: knowledge_id.clone(),
            clue_id: clues[p.clue].id.clone(),
            score: p.score,
        });
        result.snippets.push(snippet);
        result.clues.push(clues[p.clue].id.clone());
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{BackendError, MockEncoder};
    use crate::corpus::KnowledgeEntry;
    use crate::detection::BoundingBox;
    use crate::index::IndexEntry;
    use proptest::prelude::*;
    use std::collections::HashMap;
    use std::path::{Path, PathBuf};

    /// Encoder whose output is looked up by the crop bytes.
    struct TableEncoder(HashMap<Vec<u8>, Vec<f64>>);

    impl EncoderBackend for TableEncoder {
        fn encoder_id(&self) -> &str {
            "table"
        }
        fn endpoint(&self) -> &str {
            "mock://table"
        }
        fn dim(&self) -> usize {
            2
        }
        fn embed_image(&self, bytes: &[u8]) -> Result<EmbeddingVector, BackendError> {
            Ok(EmbeddingVector::new(self.0[bytes].clone()).unwrap())
        }
    }

    fn clue(dir: &Path, id: &str) -> VisualClue {
        let crop: PathBuf = dir.join(format!("{id}.bin"));
        std::fs::write(&crop, id.as_bytes()).unwrap();
        VisualClue {
            id: id.into(),
            sample_id: "s".into(),
            source_image: "img.png".into(),
            bbox: BoundingBox::new(0.0, 0.0, 1.0, 1.0),
            term: "bollard".into(),
            confidence: 0.9,
            crop,
        }
    }

    fn world(knowledge: &[(&str, [f64; 2])]) -> (KnowledgeIndex, KnowledgeBase) {
        let entries = knowledge
            .iter()
            .map(|(id, v)| IndexEntry { knowledge_id: id.to_string(), vector: EmbeddingVector::new(v.to_vec()).unwrap() })
            .collect();
        let kb = KnowledgeBase {
            image_root: ".".into(),
            entries: knowledge
                .iter()
                .map(|(id, _)| KnowledgeEntry {
                    id: id.to_string(),
                    image: format!("{id}.png"),
                    country: "X".into(),
                    snippet: format!("snippet {id}"),
                })
                .collect(),
        };
        (KnowledgeIndex::new("table".into(), 2, entries).unwrap(), kb)
    }

    #[test]
    fn single_pair_is_forced() {
        let dir = tempfile::tempdir().unwrap();
        let (index, kb) = world(&[("a", [1.0, 0.0])]);
        let enc = TableEncoder(HashMap::from([(b"c".to_vec(), vec![-1.0, 0.1])]));
        let r = retrieve_topk(&index, &kb, &[clue(dir.path(), "c")], &enc, &RetrievalOptions::default()).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.clues, ["c"]);
        assert_eq!(r.snippets, ["snippet a"]);
        assert!(r.pairs[0].score < 0.0);
    }

    #[test]
    fn repeats_and_ties() {
        let dir = tempfile::tempdir().unwrap();
        // k0 and k2 are identical directions; k0 wins ties by manifest order.
        let (index, kb) = world(&[("k0", [1.0, 0.0]), ("k1", [0.0, 1.0]), ("k2", [2.0, 0.0])]);
        let enc = TableEncoder(HashMap::from([
            (b"c0".to_vec(), vec![1.0, 0.0]),
            (b"c1".to_vec(), vec![1.0, 0.2]),
        ]));
        let clues = [clue(dir.path(), "c0"), clue(dir.path(), "c1")];
        let r = retrieve_topk(&index, &kb, &clues, &enc, &RetrievalOptions::default()).unwrap();
        let got: Vec<_> = r.pairs.iter().map(|p| (p.knowledge_id.as_str(), p.clue_id.as_str())).collect();
        assert_eq!(got, [("k0", "c0"), ("k2", "c0"), ("k0", "c1")]);
        assert_eq!(r.snippets, ["snippet k0", "snippet k2", "snippet k0"]);

        let distinct = RetrievalOptions { k: 3, distinct_knowledge: true };
        let r = retrieve_topk(&index, &kb, &clues, &enc, &distinct).unwrap();
        let got: Vec<_> = r.pairs.iter().map(|p| (p.knowledge_id.as_str(), p.clue_id.as_str())).collect();
        assert_eq!(got, [("k0", "c0"), ("k2", "c0"), ("k1", "c1")]);
    }

    #[test]
    fn empty_clues_and_mismatch() {
        let (index, kb) = world(&[("a", [1.0, 0.0])]);
        let enc = TableEncoder(HashMap::new());
        let r = retrieve_topk(&index, &kb, &[], &enc, &RetrievalOptions::default()).unwrap();
        assert!(r.pairs.is_empty() && r.snippets.is_empty() && r.clues.is_empty());
        let other = MockEncoder::new(1, 2).unwrap();
        assert!(matches!(
            retrieve_topk(&index, &kb, &[], &other, &RetrievalOptions::default()),
            Err(IndexError::EncoderMismatch { .. })
        ));
    }

    fn brute_force(scores: &[Vec<f64>], k: usize) -> Vec<(usize, usize)> {
        // Repeatedly take the maximum, preferring lower knowledge then clue index.
        let mut taken = vec![vec![false; scores.first().map_or(0, Vec::len)]; scores.len()];
        let mut out = Vec::new();
        while out.len() < k {
            let mut best: Option<(usize, usize)> = None;
            for (i, row) in scores.iter().enumerate() {
                for (j, &s) in row.iter().enumerate() {
                    if taken[i][j] {
                        continue;
                    }
                    if best.map_or(true, |(bi, bj)| s > scores[bi][bj]) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((i, j)) = best else { break };
            taken[i][j] = true;
            out.push((i, j));
        }
        out
    }

    proptest! {
        #[test]
        fn select_matches_brute_force(
            scores in prop::collection::vec(prop::collection::vec(-4i32..=4, 1..6), 1..6),
            k in 1usize..10,
        ) {
            // Small integer scores force many ties.
            let width = scores[0].len();
            let scores: Vec<Vec<f64>> = scores.iter().map(|r| (0..width).map(|j| r.get(j).copied().unwrap_or(0) as f64).collect()).collect();
            let flat: Vec<ScoredPair> = scores
                .iter()
                .enumerate()
                .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &s)| ScoredPair { knowledge: i, clue: j, score: s }))
                .collect();
            let got: Vec<_> = select_top_pairs(flat, k, false).iter().map(|p| (p.knowledge, p.clue)).collect();
            prop_assert_eq!(got, brute_force(&scores, k));
        }
    }
}
