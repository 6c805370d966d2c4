//! Builders for synthetic corpora, knowledge bases and detector fixtures.
//! Only compiled for tests or with the `testkit` feature.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use serde_json::json;

use crate::backends::Detection;
use crate::corpus::{Continent, LocationLabel};
use crate::detection::BoundingBox;

/// Deterministic RGB test pattern keyed by `seed`.
pub fn pattern_image(width: u32, height: u32, seed: u8) -> RgbImage {
    RgbImage::from_fn(width, height, |x, y| {
        let s = seed as u32;
        Rgb([
            ((x * 7 + s * 31) % 256) as u8,
            ((y * 11 + s * 17) % 256) as u8,
            (((x ^ y) * 3 + s * 53) % 256) as u8,
        ])
    })
}

pub fn write_png(path: &Path, width: u32, height: u32, seed: u8) {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).unwrap();
    }
    pattern_image(width, height, seed).save(path).unwrap();
}

/// One corpus manifest line with plain-text explanations.
pub fn sample_line(
    id: &str,
    panorama: &[&str],
    country: &str,
    continent: &str,
    explanations: &[&str],
) -> String {
    json!({
        "id": id,
        "panorama": panorama,
        "lat": 10.0,
        "lon": 20.0,
        "country": country,
        "continent": continent,
        "explanations": explanations,
    })
    .to_string()
}

const COUNTRIES: [(&str, &str, &str, &str, Continent); 10] = [
    ("France", "Brittany", "Rennes", "Rue de Brest", Continent::EU),
    ("Brazil", "Parana", "Curitiba", "Rua XV de Novembro", Continent::SA),
    ("Japan", "Hokkaido", "Sapporo", "Odori", Continent::AS),
    ("United States", "Michigan", "Houghton", "Canal Rd", Continent::NA),
    ("Kenya", "Nakuru", "Naivasha", "Moi South Lake Road", Continent::AF),
    ("Australia", "Queensland", "Brisbane", "Queen Street", Continent::OC),
    ("Norway", "Vestland", "Bergen", "Bryggen", Continent::EU),
    ("Chile", "Los Lagos", "Puerto Montt", "Avenida Angelmo", Continent::SA),
    ("Thailand", "Chiang Mai", "Chiang Mai", "Nimmanhaemin Road", Continent::AS),
    ("Canada", "Quebec", "Gaspe", "Rue Jacques Cartier", Continent::NA),
];

const EXPLANATIONS: [&str; 10] = [
    "The red and white chevrons and the bollards with a red band point to this country.",
    "Yellow license plates and the red soil along the road give this location away.",
    "Striped poles beside the road and the snow on the mountains made it clear.",
    "The double yellow center line and the green road signs are typical here.",
    "Left side driving, red soil and the utility poles with a white cap suggest this region.",
    "The long straight road and the white bollards with a red reflector are a strong clue.",
    "Snow on the mountains, the fjord and the yellow road markings narrowed it down.",
    "The guardrail style and the vegetation on the hills helped me find the region.",
    "The script on the signage text and the utility pole numbering point to this country.",
    "The bilingual road sign and the snow fence along the road made the area obvious.",
];

const TERMS: [&str; 5] = ["bollard", "road sign", "license plate", "utility pole", "chevron"];

/// A fully written synthetic world: images, corpus and knowledge manifests,
/// and a detector fixture keyed by image reference.
pub struct SyntheticWorld {
    pub root: PathBuf,
    pub corpus_manifest: PathBuf,
    pub knowledge_manifest: PathBuf,
    pub detector_fixture: PathBuf,
    pub labels: Vec<LocationLabel>,
}

impl SyntheticWorld {
    /// Writes `samples` locations (at most 10 distinct labels, recycled
    /// beyond that) with `images_per_sample` 48x32 images each, and a
    /// 6-entry knowledge base.
    pub fn build(root: &Path, samples: usize, images_per_sample: usize) -> SyntheticWorld {
        let img_dir = root.join("images");
        let kimg_dir = root.join("knowledge_images");
        fs::create_dir_all(&img_dir).unwrap();
        fs::create_dir_all(&kimg_dir).unwrap();

        let mut corpus = String::from("{\"schema_version\":1,\"image_root\":\"images\"}\n");
        let mut fixture: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
        let mut labels = Vec::new();
        for s in 0..samples {
            let (country, state, city, street, continent) = COUNTRIES[s % COUNTRIES.len()];
            let id = format!("loc{s:03}");
            let mut panorama = Vec::new();
            for i in 0..images_per_sample {
                let name = format!("{id}_{i:02}.png");
                write_png(&img_dir.join(&name), 48, 32, (s * 13 + i * 7) as u8);
                // Every image gets one or two detections; some overlap.
                let term = TERMS[(s + i) % TERMS.len()];
                let mut dets = vec![Detection {
                    bbox: BoundingBox::new(4.0 + i as f64, 4.0, 16.0, 12.0),
                    term: term.to_string(),
                    confidence: 0.5 + 0.04 * ((s + 2 * i) % 10) as f64,
                }];
                if i % 2 == 0 {
                    dets.push(Detection {
                        bbox: BoundingBox::new(26.0, 14.0, 14.0, 14.0),
                        term: TERMS[(s + i + 1) % TERMS.len()].to_string(),
                        confidence: 0.41 + 0.03 * (i % 5) as f64,
                    });
                }
                fixture.insert(name.clone(), dets);
                panorama.push(name);
            }
            let label = LocationLabel::new(country)
                .with_state(state)
                .with_city(city)
                .with_street(street);
            labels.push(label);
            let line = json!({
                "id": id,
                "panorama": panorama,
                "lat": -30.0 + s as f64,
                "lon": 100.0 - 3.5 * s as f64,
                "country": country,
                "state": state,
                "city": city,
                "street": street,
                "continent": continent,
                "explanations": [
                    EXPLANATIONS[s % EXPLANATIONS.len()],
                    EXPLANATIONS[(s + 3) % EXPLANATIONS.len()],
                ],
            });
            corpus.push_str(&line.to_string());
            corpus.push('\n');
        }
        let corpus_manifest = root.join("corpus.jsonl");
        fs::write(&corpus_manifest, corpus).unwrap();

        let mut knowledge = String::from("{\"schema_version\":1,\"image_root\":\"knowledge_images\"}\n");
        for k in 0..6 {
            let (country, ..) = COUNTRIES[k];
            let name = format!("k{k}.png");
            write_png(&kimg_dir.join(&name), 24, 24, (200 + k * 9) as u8);
            let line = json!({
                "id": format!("kb{k}"),
                "image": name,
                "country": country,
                "snippet": format!("{country}: {}", EXPLANATIONS[k]),
            });
            knowledge.push_str(&line.to_string());
            knowledge.push('\n');
        }
        let knowledge_manifest = root.join("knowledge.jsonl");
        fs::write(&knowledge_manifest, knowledge).unwrap();

        let detector_fixture = root.join("detections.json");
        fs::write(&detector_fixture, serde_json::to_string_pretty(&fixture).unwrap()).unwrap();

        SyntheticWorld {
            root: root.to_path_buf(),
            corpus_manifest,
            knowledge_manifest,
            detector_fixture,
            labels,
        }
    }
}
