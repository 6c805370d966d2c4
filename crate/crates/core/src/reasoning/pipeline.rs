//! Per-sample driver: detection, retrieval, generation, parsing.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::prompt::{assemble_prompt, dedup_in_order, TemplateRegistry, DEFAULT_TEMPLATE_ID};
use super::thumbnail::{concat_strip, decode, encode_png, make_thumbnail, ThumbnailParams};
use super::{parse_answer, ReasoningError};
use crate::backends::{
    DetectorBackend, EncoderBackend, GenerationRequest, GeneratorBackend, PromptImage, SamplingOptions,
};
use crate::corpus::{GeoSample, KnowledgeBase, LocationLabel};
use crate::detection::{detect_clues, file_stem_for, ClueSource, DetectionParams, DetectionPromptVocabulary, VisualClue};
use crate::digest::{sha256_hex, PartHasher};
use crate::index::{encode_index, retrieve_topk, KnowledgeIndex, RetrievalOptions, RetrievalPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stages {
    pub detection: bool,
    pub retrieval: bool,
}

impl Default for Stages {
    fn default() -> Self {
        Self {
            detection: true,
            retrieval: true,
        }
    }
}

impl Stages {
    pub fn mode(&self) -> Mode {
        match (self.detection, self.retrieval) {
            (true, true) => Mode::PanoramaCluesKnowledge,
            (true, false) => Mode::PanoramaClues,
            _ => Mode::Panorama,
        }
    }
}

/// Which inputs reach the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "P")]
    Panorama,
    #[serde(rename = "P+VC")]
    PanoramaClues,
    #[serde(rename = "P+VC+K")]
    PanoramaCluesKnowledge,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Panorama => "P",
            Mode::PanoramaClues => "P+VC",
            Mode::PanoramaCluesKnowledge => "P+VC+K",
        })
    }
}

/// How images are handed to the generator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageMode {
    /// One image part per picture: thumbnail, then clues.
    #[default]
    MultiImage,
    /// Thumbnail and clues pasted left to right into one picture.
    SingleStrip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    pub stages: Stages,
    pub retrieval: RetrievalOptions,
    pub detection: DetectionParams,
    pub thumbnail: ThumbnailParams,
    pub template_id: String,
    pub image_mode: ImageMode,
    pub sampling: SamplingOptions,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            stages: Stages::default(),
            retrieval: RetrievalOptions::default(),
            detection: DetectionParams::default(),
            thumbnail: ThumbnailParams::default(),
            template_id: DEFAULT_TEMPLATE_ID.to_string(),
            image_mode: ImageMode::default(),
            sampling: SamplingOptions::default(),
        }
    }
}

impl PipelineSettings {
    pub fn validate(&self) -> Result<(), ReasoningError> {
        if self.stages.retrieval && !self.stages.detection {
            return Err(ReasoningError::Config("retrieval requires the detection stage".into()));
        }
        if self.retrieval.k == 0 {
            return Err(ReasoningError::Config("retrieval.k must be at least 1".into()));
        }
        let d = &self.detection;
        if !(0.0..=1.0).contains(&d.min_confidence) || !(0.0..=1.0).contains(&d.iou_threshold) {
            return Err(ReasoningError::Config("detection thresholds must lie in [0, 1]".into()));
        }
        if !(d.pad_fraction.is_finite() && d.pad_fraction >= 0.0) {
            return Err(ReasoningError::Config("detection.pad_fraction must be non-negative".into()));
        }
        self.thumbnail.validate().map_err(ReasoningError::Config)
    }
}

#[derive(Clone, Copy)]
pub struct Backends<'a> {
    pub detector: &'a dyn DetectorBackend,
    pub encoder: &'a dyn EncoderBackend,
    pub generator: &'a dyn GeneratorBackend,
}

/// Everything a run needs besides the samples themselves.
pub struct PipelineResources<'a> {
    pub settings: PipelineSettings,
    pub backends: Backends<'a>,
    pub registry: TemplateRegistry,
    /// Required when detection is enabled.
    pub vocabulary: Option<&'a DetectionPromptVocabulary>,
    /// Required when retrieval is enabled.
    pub index: Option<&'a KnowledgeIndex>,
    pub knowledge: Option<&'a KnowledgeBase>,
    /// Root that panorama references resolve under.
    pub image_root: PathBuf,
    /// Receives thumbnails and clue crops.
    pub work_dir: PathBuf,
}

/// Validated resources plus the configuration hash stamped on every record.
pub struct PipelineContext<'a> {
    res: PipelineResources<'a>,
    config_hash: String,
}

impl<'a> PipelineContext<'a> {
    pub fn new(res: PipelineResources<'a>) -> Result<Self, ReasoningError> {
        res.settings.validate()?;
        let template = res.registry.get(&res.settings.template_id)?;
        let stages = res.settings.stages;
        if stages.detection && res.vocabulary.is_none() {
            return Err(ReasoningError::Config("detection is enabled but no vocabulary was given".into()));
        }
        if stages.retrieval {
            let (Some(index), Some(kb)) = (res.index, res.knowledge) else {
                return Err(ReasoningError::Config(
                    "retrieval is enabled but the knowledge index or knowledge base is missing".into(),
                ));
            };
            if index.encoder_id != res.backends.encoder.encoder_id() {
                return Err(ReasoningError::Config(format!(
                    "index was built with encoder `{}` but `{}` is configured",
                    index.encoder_id,
                    res.backends.encoder.encoder_id()
                )));
            }
            if let Some(missing) = index.entries.iter().find(|e| kb.get(&e.knowledge_id).is_none()) {
                return Err(ReasoningError::Config(format!(
                    "index entry `{}` is not in the knowledge base",
                    missing.knowledge_id
                )));
            }
        }

        // Paths and concurrency are deliberately excluded so that moving a
        // run or changing the worker count keeps records identical.
        let mut h = PartHasher::new();
        h.str("settings")
            .str(&serde_json::to_string(&res.settings).expect("settings serialize"))
            .str("template")
            .str(template)
            .str("generator")
            .str(res.backends.generator.model_id());
        if stages.detection {
            let vocab = res.vocabulary.expect("checked above");
            h.str("vocabulary")
                .str(&serde_json::to_string(&vocab.terms).expect("terms serialize"))
                .str("detector")
                .str(res.backends.detector.endpoint());
        }
        if stages.retrieval {
            let kb = res.knowledge.expect("checked above");
            h.str("index")
                .part(&encode_index(res.index.expect("checked above")))
                .str("knowledge")
                .str(&serde_json::to_string(&kb.entries).expect("entries serialize"));
        }
        let config_hash = h.finish_hex();
        Ok(Self { res, config_hash })
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn settings(&self) -> &PipelineSettings {
        &self.res.settings
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionStatus {
    Ok,
    /// Generation succeeded but no location could be read from the output.
    ParseFailure,
    /// A stage failed; `errors` holds the reasons.
    Failed,
}

/// What reached the generator and how it was configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub mode: Mode,
    pub thumbnail_views: Vec<usize>,
    /// Clues produced by detection, before any selection.
    pub detected_clues: usize,
    /// Clue crops sent to the generator, in prompt order.
    pub clue_ids: Vec<String>,
    /// Knowledge entries whose snippets were sent, in prompt order.
    pub knowledge_ids: Vec<String>,
    pub retrieval_pairs: Vec<RetrievalPair>,
    pub image_count: usize,
    pub snippet_count: usize,
    pub prompt_sha256: Option<String>,
    pub model_id: String,
    pub template_id: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub status: PredictionStatus,
    pub location: LocationLabel,
    pub explanation: String,
    /// Generator output, verbatim.
    pub raw_output: String,
    pub errors: Vec<String>,
    pub provenance: Provenance,
}

struct Failure {
    stage: &'static str,
    message: String,
}

fn fail(stage: &'static str, err: impl fmt::Display) -> Failure {
    Failure {
        stage,
        message: err.to_string(),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, ReasoningError> {
    std::fs::read(path).map_err(|e| ReasoningError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ReasoningError> {
    let io = |e| ReasoningError::Io {
        path: path.display().to_string(),
        source: e,
    };
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}

/// Highest-confidence clues first, ties by detection order.
fn top_clues_by_confidence(clues: &[VisualClue], k: usize) -> Vec<&VisualClue> {
    let mut sorted: Vec<&VisualClue> = clues.iter().collect();
    sorted.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    sorted.truncate(k);
    sorted
}

fn execute(sample: &GeoSample, ctx: &PipelineContext<'_>, prov: &mut Provenance) -> Result<String, Failure> {
    let res = &ctx.res;
    let settings = &res.settings;
    let stem = file_stem_for(&sample.id);

    let thumb = make_thumbnail(&res.image_root, &sample.panorama, &settings.thumbnail).map_err(|e| fail("thumbnail", e))?;
    prov.thumbnail_views = thumb.views.clone();
    let thumb_png = encode_png(&thumb.image);
    let thumb_path = res.work_dir.join("thumbnails").join(format!("{stem}.png"));
    write(&thumb_path, &thumb_png).map_err(|e| fail("thumbnail", e))?;

    let mut clues = Vec::new();
    if settings.stages.detection {
        let crop_dir = res.work_dir.join("crops").join(&stem);
        let source = ClueSource {
            sample_id: &sample.id,
            panorama: &sample.panorama,
            image_root: &res.image_root,
            crop_dir: &crop_dir,
        };
        let vocab = res.vocabulary.expect("validated");
        clues = detect_clues(source, vocab, res.backends.detector, &settings.detection).map_err(|e| fail("detection", e))?;
    }
    prov.detected_clues = clues.len();

    let (selected, snippets): (Vec<&VisualClue>, Vec<String>) = if settings.stages.retrieval {
        let index = res.index.expect("validated");
        let kb = res.knowledge.expect("validated");
        let result =
            retrieve_topk(index, kb, &clues, res.backends.encoder, &settings.retrieval).map_err(|e| fail("retrieval", e))?;
        let clue_ids = dedup_in_order(&result.clues);
        let selected = clue_ids
            .iter()
            .map(|id| clues.iter().find(|c| &c.id == id).expect("retrieved clue exists"))
            .collect();
        let knowledge_ids: Vec<String> = result.pairs.iter().map(|p| p.knowledge_id.clone()).collect();
        prov.knowledge_ids = dedup_in_order(&knowledge_ids);
        let snippets = dedup_in_order(&result.snippets);
        prov.retrieval_pairs = result.pairs;
        (selected, snippets)
    } else {
        (top_clues_by_confidence(&clues, settings.retrieval.k), Vec::new())
    };
    prov.clue_ids = selected.iter().map(|c| c.id.clone()).collect();
    prov.snippet_count = snippets.len();

    let crop_paths: Vec<PathBuf> = selected.iter().map(|c| c.crop.clone()).collect();
    let (_, text) = assemble_prompt(&thumb_path, &crop_paths, &snippets, &res.registry, &settings.template_id)
        .map_err(|e| fail("prompt", e))?;

    let images = match settings.image_mode {
        ImageMode::MultiImage => {
            let mut images = vec![PromptImage {
                label: "thumbnail".into(),
                png: thumb_png,
            }];
            for c in &selected {
                images.push(PromptImage {
                    label: format!("clue:{}", c.id),
                    png: read(&c.crop).map_err(|e| fail("prompt", e))?,
                });
            }
            images
        }
        ImageMode::SingleStrip => {
            let mut parts = vec![thumb.image];
            for c in &selected {
                parts.push(decode(&c.crop, &c.id).map_err(|e| fail("prompt", e))?);
            }
            vec![PromptImage {
                label: "strip".into(),
                png: encode_png(&concat_strip(&parts)),
            }]
        }
    };
    prov.image_count = images.len();
    prov.prompt_sha256 = Some(sha256_hex(text.instruction.as_bytes()));

    let request = GenerationRequest {
        sample_id: sample.id.clone(),
        images,
        prompt: text.instruction,
        options: settings.sampling.clone(),
    };
    res.backends.generator.generate(&request).map_err(|e| fail("generation", e))
}

/// Runs all enabled stages for one sample. Stage failures never propagate:
/// they yield a record with status `Failed` and the error chain.
pub fn run_pipeline(sample: &GeoSample, ctx: &PipelineContext<'_>) -> PredictionRecord {
    let mut prov = Provenance {
        mode: ctx.res.settings.stages.mode(),
        thumbnail_views: Vec::new(),
        detected_clues: 0,
        clue_ids: Vec::new(),
        knowledge_ids: Vec::new(),
        retrieval_pairs: Vec::new(),
        image_count: 0,
        snippet_count: 0,
        prompt_sha256: None,
        model_id: ctx.res.backends.generator.model_id().to_string(),
        template_id: ctx.res.settings.template_id.clone(),
        config_hash: ctx.config_hash.clone(),
    };
    let empty = LocationLabel {
        country: String::new(),
        state: None,
        city: None,
        street: None,
    };
    match execute(sample, ctx, &mut prov) {
        Err(f) => {
            let message = format!("{} stage failed for sample `{}`: {}", f.stage, sample.id, f.message);
            log::warn!("{message}");
            PredictionRecord {
                sample_id: sample.id.clone(),
                status: PredictionStatus::Failed,
                location: empty,
                explanation: String::new(),
                raw_output: String::new(),
                errors: vec![message],
                provenance: prov,
            }
        }
        Ok(raw) => match parse_answer(&raw) {
            Ok(parsed) => PredictionRecord {
                sample_id: sample.id.clone(),
                status: PredictionStatus::Ok,
                location: parsed.location,
                explanation: parsed.explanation,
                raw_output: raw,
                errors: Vec::new(),
                provenance: prov,
            },
            Err(failure) => PredictionRecord {
                sample_id: sample.id.clone(),
                status: PredictionStatus::ParseFailure,
                location: empty,
                explanation: String::new(),
                errors: vec![format!("parse: {failure}")],
                raw_output: failure.raw,
                provenance: prov,
            },
        },
    }
}

/// Processes samples on a pool of `concurrency` workers. Output order is
/// sample order.
pub fn run_batch(
    samples: &[GeoSample],
    ctx: &PipelineContext<'_>,
    concurrency: usize,
) -> Result<Vec<PredictionRecord>, ReasoningError> {
    use rayon::prelude::*;
    if concurrency == 0 {
        return Err(ReasoningError::Config("concurrency must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency)
        .build()
        .map_err(|e| ReasoningError::Config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| samples.par_iter().map(|s| run_pipeline(s, ctx)).collect()))
}
