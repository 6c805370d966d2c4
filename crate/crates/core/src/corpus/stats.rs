use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Continent, Corpus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub location_count: u64,
    pub panorama_image_count: u64,
    pub explanation_count: u64,
    /// Mean panorama size in hundredths, rounded half up. `None` for an
    /// empty corpus.
    pub mean_panoramas_centi: Option<u64>,
    pub min_panoramas: Option<u64>,
    pub max_panoramas: Option<u64>,
    /// Every continent is present, zero counts included.
    pub per_continent: BTreeMap<Continent, u64>,
}

impl CorpusStats {
    pub fn mean_panoramas(&self) -> Option<f64> {
        self.mean_panoramas_centi.map(|c| c as f64 / 100.0)
    }

    pub fn mean_display(&self) -> String {
        match self.mean_panoramas_centi {
            Some(c) => format!("{}.{:02}", c / 100, c % 100),
            None => "n/a".to_string(),
        }
    }
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut per_continent: BTreeMap<Continent, u64> =
        Continent::ALL.into_iter().map(|c| (c, 0)).collect();
    let mut images = 0u64;
    let mut explanations = 0u64;
    let mut min = None::<u64>;
    let mut max = None::<u64>;
    for s in &corpus.samples {
        let n = s.panorama.len() as u64;
        images += n;
        explanations += s.explanations.len() as u64;
        min = Some(min.map_or(n, |m| m.min(n)));
        max = Some(max.map_or(n, |m| m.max(n)));
        *per_continent.entry(s.continent).or_default() += 1;
    }
    let count = corpus.samples.len() as u64;
    // round(100 * images / count) with halves rounded up, in integers.
    let mean_centi = (count > 0).then(|| (200 * images + count) / (2 * count));
    CorpusStats {
        location_count: count,
        panorama_image_count: images,
        explanation_count: explanations,
        mean_panoramas_centi: mean_centi,
        min_panoramas: min,
        max_panoramas: max,
        per_continent,
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<u64>| v.map_or_else(|| "n/a".to_string(), |v| v.to_string());
        writeln!(f, "{:<24}{:>10}", "locations", self.location_count)?;
        writeln!(f, "{:<24}{:>10}", "panorama images", self.panorama_image_count)?;
        writeln!(f, "{:<24}{:>10}", "explanations", self.explanation_count)?;
        writeln!(f, "{:<24}{:>10}", "panoramas/location mean", self.mean_display())?;
        writeln!(f, "{:<24}{:>10}", "panoramas/location min", opt(self.min_panoramas))?;
        writeln!(f, "{:<24}{:>10}", "panoramas/location max", opt(self.max_panoramas))?;
        writeln!(f)?;
        let header: Vec<String> = self.per_continent.keys().map(|c| format!("{:>6}", c.code())).collect();
        let counts: Vec<String> = self.per_continent.values().map(|n| format!("{n:>6}")).collect();
        writeln!(f, "{}", header.join(""))?;
        write!(f, "{}", counts.join(""))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Coordinates, GeoSample, LocationLabel};
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn sample(id: usize, panoramas: usize, continent: Continent, explanations: usize) -> GeoSample {
        GeoSample {
            id: format!("s{id}"),
            panorama: (0..panoramas).map(|i| format!("{i}.png")).collect(),
            coordinates: Coordinates { lat: 0.0, lon: 0.0 },
            location: LocationLabel::new("X"),
            explanations: (0..explanations).map(|i| format!("e{i}")).collect(),
            continent,
        }
    }

    fn corpus(samples: Vec<GeoSample>) -> Corpus {
        Corpus {
            image_root: PathBuf::from("."),
            samples,
        }
    }

    #[test]
    fn empty_corpus() {
        let s = corpus_stats(&corpus(vec![]));
        assert_eq!(s.location_count, 0);
        assert_eq!(s.panorama_image_count, 0);
        assert_eq!(s.explanation_count, 0);
        assert_eq!(s.mean_panoramas(), None);
        assert_eq!(s.mean_display(), "n/a");
        assert_eq!(s.min_panoramas, None);
        assert!(s.per_continent.values().all(|&n| n == 0));
    }

    #[test]
    fn three_and_five() {
        let s = corpus_stats(&corpus(vec![
            sample(0, 3, Continent::EU, 2),
            sample(1, 5, Continent::SA, 1),
        ]));
        assert_eq!(s.mean_display(), "4.00");
        assert_eq!(s.min_panoramas, Some(3));
        assert_eq!(s.max_panoramas, Some(5));
        assert_eq!(s.panorama_image_count, 8);
        assert_eq!(s.explanation_count, 3);
        assert_eq!(s.per_continent[&Continent::EU], 1);
        assert_eq!(s.per_continent[&Continent::AS], 0);
    }

    #[test]
    fn mean_rounds_half_up() {
        // 3 + 3 + 3 + 4 + 4 + 4 + 4 + 4 = 29 over 8 = 3.625 -> 3.63
        let samples = (0..8).map(|i| sample(i, if i < 3 { 3 } else { 4 }, Continent::AS, 1)).collect();
        assert_eq!(corpus_stats(&corpus(samples)).mean_display(), "3.63");
        // 10 / 3 = 3.333.. -> 3.33
        let samples = vec![sample(0, 3, Continent::AS, 1), sample(1, 3, Continent::AS, 1), sample(2, 4, Continent::AS, 1)];
        assert_eq!(corpus_stats(&corpus(samples)).mean_display(), "3.33");
    }

    proptest! {
        #[test]
        fn continent_counts_sum_to_total(specs in prop::collection::vec((3usize..=33, 0usize..7, 1usize..4), 0..60)) {
            let samples: Vec<_> = specs
                .iter()
                .enumerate()
                .map(|(i, &(p, c, e))| sample(i, p, Continent::ALL[c], e))
                .collect();
            let s = corpus_stats(&corpus(samples));
            prop_assert_eq!(s.per_continent.values().sum::<u64>(), s.location_count);
            if let (Some(min), Some(max), Some(mean)) = (s.min_panoramas, s.max_panoramas, s.mean_panoramas()) {
                prop_assert!(min as f64 <= mean && mean <= max as f64);
            }
        }
    }
}
