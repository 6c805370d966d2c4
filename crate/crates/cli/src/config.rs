//! TOML run configuration. Relative paths resolve against the directory of
//! the config file. Credentials never live here: remote backends name an
//! environment variable instead.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

use georeason_core::backends::{
    BackendConfig, DetectorBackend, EchoEntry, EncoderBackend, GeneratorBackend, MockDetector, MockEncoder,
    MockGenerator, MockGeneratorMode, RemoteDetector, RemoteEncoder, RemoteGenerator, SamplingOptions,
};
use georeason_core::corpus::{Corpus, DEFAULT_MIN_SCORE};
use georeason_core::detection::DetectionParams;
use georeason_core::evaluation::{MatchMode, Scale, DEFAULT_THRESHOLD};
use georeason_core::index::{RetrievalOptions, DEFAULT_DIM};
use georeason_core::reasoning::{ImageMode, PipelineSettings, Stages, ThumbnailParams, DEFAULT_TEMPLATE_ID};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub stages: StagesSection,
    #[serde(default)]
    pub detection: DetectionParams,
    #[serde(default)]
    pub retrieval: RetrievalOptions,
    #[serde(default)]
    pub thumbnail: ThumbnailParams,
    #[serde(default)]
    pub generation: GenerationSection,
    #[serde(default)]
    pub backends: BackendsSection,
    #[serde(default)]
    pub ingest: IngestSection,
    #[serde(default)]
    pub vocab: VocabSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    /// Directory the config was read from.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub corpus: Option<PathBuf>,
    pub knowledge: Option<PathBuf>,
    pub vocabulary: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub blacklist: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub output_dir: PathBuf,
    pub concurrency: usize,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            concurrency: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggle {
    pub enabled: bool,
}

impl Default for Toggle {
    fn default() -> Self {
        Self { enabled: true }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StagesSection {
    pub detection: Toggle,
    pub retrieval: Toggle,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    pub template: String,
    pub image_mode: ImageMode,
    pub temperature: Option<f64>,
    pub top_p: Option<f64>,
    pub max_tokens: Option<u32>,
}

impl Default for GenerationSection {
    fn default() -> Self {
        Self {
            template: DEFAULT_TEMPLATE_ID.to_string(),
            image_mode: ImageMode::default(),
            temperature: None,
            top_p: None,
            max_tokens: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorSpec {
    Mock {
        /// JSON `{image_ref: [detections]}`; absent means no detections.
        fixture: Option<PathBuf>,
    },
    Remote(BackendConfig),
}

impl Default for DetectorSpec {
    fn default() -> Self {
        DetectorSpec::Mock { fixture: None }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderSpec {
    Mock {
        /// Defaults to the run seed.
        seed: Option<u64>,
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Remote {
        encoder_id: String,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        supports_text: bool,
        #[serde(flatten)]
        connection: BackendConfig,
    },
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec::Mock {
            seed: None,
            dim: DEFAULT_DIM,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockMode {
    /// Answers each sample with its ground-truth label and first explanation.
    EchoTemplate,
    FixedText,
    Script,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Mock {
        mode: MockMode,
        text: Option<String>,
        /// JSON `{sample_id: text}` for script mode.
        script: Option<PathBuf>,
    },
    Remote {
        model_id: String,
        #[serde(flatten)]
        connection: BackendConfig,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendsSection {
    pub detector: DetectorSpec,
    pub encoder: EncoderSpec,
    pub generator: Option<GeneratorSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub min_score: i64,
}

impl Default for IngestSection {
    fn default() -> Self {
        Self {
            min_score: DEFAULT_MIN_SCORE,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabSection {
    pub top_n: usize,
}

impl Default for VocabSection {
    fn default() -> Self {
        Self { top_n: 14 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub mode: MatchMode,
    pub threshold: f64,
    pub scale: Scale,
    /// Requires an encoder with text embeddings.
    pub bertscore: bool,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            mode: MatchMode::Independent,
            threshold: DEFAULT_THRESHOLD,
            scale: Scale::Percent,
            bertscore: false,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Config = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() || self.base_dir.as_os_str().is_empty() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn path(&self, p: &Option<PathBuf>) -> Option<PathBuf> {
        p.as_deref().map(|p| self.resolve(p))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.run.output_dir)
    }

    pub fn settings(&self) -> PipelineSettings {
        PipelineSettings {
            stages: Stages {
                detection: self.stages.detection.enabled,
                retrieval: self.stages.retrieval.enabled,
            },
            retrieval: self.retrieval,
            detection: self.detection,
            thumbnail: self.thumbnail,
            template_id: self.generation.template.clone(),
            image_mode: self.generation.image_mode,
            sampling: SamplingOptions {
                temperature: self.generation.temperature,
                top_p: self.generation.top_p,
                max_tokens: self.generation.max_tokens,
                seed: Some(self.run.seed),
            },
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.run.concurrency == 0 {
            bail!("run.concurrency must be at least 1");
        }
        if self.retrieval.k == 0 {
            bail!("retrieval.k must be at least 1");
        }
        if self.vocab.top_n == 0 {
            bail!("vocab.top_n must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.evaluation.threshold) {
            bail!("evaluation.threshold must lie in [0, 1]");
        }
        for (key, path) in [
            ("paths.vocabulary", &self.paths.vocabulary),
            ("paths.templates", &self.paths.templates),
            ("paths.aliases", &self.paths.aliases),
            ("paths.blacklist", &self.paths.blacklist),
        ] {
            if let Some(p) = self.path(path) {
                if !p.exists() {
                    bail!("{key} points to missing {}", p.display());
                }
            }
        }
        Ok(())
    }

    pub fn detector(&self) -> anyhow::Result<Box<dyn DetectorBackend>> {
        Ok(match &self.backends.detector {
            DetectorSpec::Mock { fixture: None } => Box::new(MockDetector::default()),
            DetectorSpec::Mock { fixture: Some(p) } => Box::new(MockDetector::from_file(&self.resolve(p))?),
            DetectorSpec::Remote(c) => Box::new(RemoteDetector::new(c.clone())?),
        })
    }

    pub fn encoder(&self) -> anyhow::Result<Box<dyn EncoderBackend>> {
        Ok(match &self.backends.encoder {
            EncoderSpec::Mock { seed, dim } => Box::new(MockEncoder::new(seed.unwrap_or(self.run.seed), *dim)?),
            EncoderSpec::Remote {
                encoder_id,
                dim,
                supports_text,
                connection,
            } => Box::new(RemoteEncoder::new(connection.clone(), encoder_id.clone(), *dim, *supports_text)?),
        })
    }

    /// Echo mode needs the corpus to know each sample's answer.
    pub fn generator(&self, corpus: &Corpus) -> anyhow::Result<Box<dyn GeneratorBackend>> {
        let Some(spec) = &self.backends.generator else {
            bail!("backends.generator is not configured");
        };
        Ok(match spec {
            GeneratorSpec::Mock { mode, text, script } => {
                let mode = match mode {
                    MockMode::EchoTemplate => MockGeneratorMode::EchoTemplate(
                        corpus
                            .samples
                            .iter()
                            .map(|s| {
                                let entry = EchoEntry {
                                    location: s.location.clone(),
                                    explanation: s.explanations[0].clone(),
                                };
                                (s.id.clone(), entry)
                            })
                            .collect(),
                    ),
                    MockMode::FixedText => MockGeneratorMode::FixedText(
                        text.clone().context("mock fixed_text generator needs `text`")?,
                    ),
                    MockMode::Script => {
                        let path = self.resolve(script.as_deref().context("mock script generator needs `script`")?);
                        let raw = std::fs::read_to_string(&path)
                            .with_context(|| format!("reading script {}", path.display()))?;
                        let table: BTreeMap<String, String> =
                            serde_json::from_str(&raw).with_context(|| format!("parsing script {}", path.display()))?;
                        MockGeneratorMode::Script(table)
                    }
                };
                Box::new(MockGenerator::new(mode))
            }
            GeneratorSpec::Remote { model_id, connection } => {
                Box::new(RemoteGenerator::new(connection.clone(), model_id.clone())?)
            }
        })
    }
}
