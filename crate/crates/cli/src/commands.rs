use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde_json::json;

use georeason_core::backends::{BackendConfig, EncoderBackend, RemoteEncoder};
use georeason_core::corpus::{
    corpus_stats, load_corpus, load_knowledge, scan_corpus, write_corpus, Corpus, ExplanationFilter,
    PhraseBlacklist,
};
use georeason_core::detection::{build_prompt_vocabulary, DetectionPromptVocabulary};
use georeason_core::evaluation::{evaluate_run, render_report, write_reports, AliasTable, EvalConfig};
use georeason_core::index::{build_index, load_index, save_index, DEFAULT_DIM};
use georeason_core::reasoning::{
    run_batch, Backends, PipelineContext, PipelineResources, PredictionRecord, PredictionStatus, TemplateRegistry,
};

use crate::config::{Config, EncoderSpec};
use crate::failure::{self, Failure};
use crate::{Cli, Command, EvaluateArgs, GlobalArgs, IndexArgs, IngestArgs, RunArgs, VocabArgs};

pub const CLEAN_CORPUS_FILE: &str = "corpus.clean.jsonl";
pub const INGEST_REPORT_FILE: &str = "ingest_report.jsonl";
pub const STATS_FILE: &str = "stats.json";
pub const VOCAB_FILE: &str = "vocabulary.json";
pub const INDEX_FILE: &str = "knowledge.idx";
pub const RESULTS_FILE: &str = "results.jsonl";
pub const RUN_MANIFEST_FILE: &str = "run.json";

type Outcome = Result<(), Failure>;

/// Loaded config with global flag overrides applied.
struct Env {
    cfg: Config,
    output_dir: PathBuf,
}

impl Env {
    fn new(global: &GlobalArgs) -> Result<Self, Failure> {
        let mut cfg = match &global.config {
            Some(path) => Config::load(path).map_err(Failure::config)?,
            None => Config::default(),
        };
        if let Some(c) = global.concurrency {
            cfg.run.concurrency = c;
        }
        if let Some(s) = global.seed {
            cfg.run.seed = s;
        }
        cfg.validate().map_err(Failure::config)?;
        let output_dir = global.output_dir.clone().unwrap_or_else(|| cfg.output_dir());
        Ok(Self { cfg, output_dir })
    }

    /// A flag path as given, otherwise the config path resolved against the
    /// config file.
    fn pick(&self, flag: &Option<PathBuf>, configured: &Option<PathBuf>) -> Option<PathBuf> {
        flag.clone().or_else(|| self.cfg.path(configured))
    }

    fn out_file(&self, name: &str) -> Result<PathBuf, Failure> {
        fs::create_dir_all(&self.output_dir)
            .with_context(|| format!("creating {}", self.output_dir.display()))
            .map_err(Failure::backend)?;
        Ok(self.output_dir.join(name))
    }
}

pub(crate) fn dispatch(cli: Cli) -> Outcome {
    let env = Env::new(&cli.global)?;
    match cli.command {
        Command::Ingest(a) => cmd_ingest(&env, &a),
        Command::Vocab(a) => cmd_vocab(&env, &a),
        Command::Index(a) => cmd_index(&env, &a),
        Command::Run(a) => cmd_run(&env, &a),
        Command::Evaluate(a) => cmd_evaluate(&env, &a),
    }
}

fn required(path: Option<PathBuf>, what: &str) -> Result<PathBuf, Failure> {
    path.ok_or_else(|| Failure::config(anyhow!("no {what} given (flag or config)")))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::backend)
}

fn cmd_ingest(env: &Env, args: &IngestArgs) -> Outcome {
    let manifest = required(env.pick(&args.corpus, &env.cfg.paths.corpus), "corpus manifest")?;
    let min_score = args.min_score.unwrap_or(env.cfg.ingest.min_score);
    let blacklist = match env.cfg.path(&env.cfg.paths.blacklist) {
        Some(p) => PhraseBlacklist::from_file(&p).map_err(failure::corpus)?,
        None => PhraseBlacklist::default(),
    };
    let filter = ExplanationFilter {
        blacklist,
        ..ExplanationFilter::default()
    };

    let scan = scan_corpus(&manifest).map_err(failure::corpus)?;
    let total = scan.records.len();
    let mut samples = Vec::new();
    let mut report = Vec::new();
    let (mut violations, mut dropped) = (0usize, 0usize);
    for record in scan.records {
        let raw = match record {
            Ok(raw) => raw,
            Err(v) => {
                eprintln!("record {}: {}", v.record, v.reason);
                report.push(json!({"kind": "violation", "violation": v}));
                violations += 1;
                continue;
            }
        };
        let kept = filter.filter(&raw.explanations, min_score);
        if kept.is_empty() {
            report.push(json!({
                "kind": "dropped",
                "record": raw.record,
                "id": raw.id,
                "reason": "no explanation survived filtering",
                "explanations_in": raw.explanations.len(),
            }));
            dropped += 1;
            continue;
        }
        let removed = raw.explanations.len() - kept.len();
        match raw.into_sample(kept, &scan.image_root) {
            Ok(s) => {
                if removed > 0 {
                    report.push(json!({"kind": "filtered", "id": s.id, "removed": removed}));
                }
                samples.push(s);
            }
            Err(v) => {
                eprintln!("record {}: {}", v.record, v.reason);
                report.push(json!({"kind": "violation", "violation": v}));
                violations += 1;
            }
        }
    }
    report.push(json!({
        "kind": "summary",
        "records": total,
        "accepted": samples.len(),
        "violations": violations,
        "dropped": dropped,
        "min_score": min_score,
    }));

    let corpus = Corpus {
        image_root: scan.image_root,
        samples,
    };
    let clean = env.out_file(CLEAN_CORPUS_FILE)?;
    write_corpus(&clean, &corpus).map_err(failure::corpus)?;
    let lines: String = report.iter().map(|r| format!("{r}\n")).collect();
    write_text(&env.out_file(INGEST_REPORT_FILE)?, &lines)?;
    let stats = corpus_stats(&corpus);
    let stats_json = serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n";
    write_text(&env.out_file(STATS_FILE)?, &stats_json)?;

    println!("{stats}");
    eprintln!(
        "ingest: {total} record(s), {} accepted, {violations} violation(s), {dropped} dropped",
        corpus.samples.len()
    );
    if violations > 0 {
        return Err(Failure::data(anyhow!("{violations} record(s) violate the manifest schema")));
    }
    Ok(())
}

fn cmd_vocab(env: &Env, args: &VocabArgs) -> Outcome {
    let vocab = if args.default_terms {
        DetectionPromptVocabulary::default_terms()
    } else {
        let corpus_path = required(env.pick(&args.corpus, &env.cfg.paths.corpus), "corpus manifest")?;
        let corpus = load_corpus(&corpus_path).map_err(failure::corpus)?;
        let explanations: Vec<String> = corpus.samples.iter().flat_map(|s| s.explanations.clone()).collect();
        let snippets: Vec<String> = match env.pick(&args.knowledge, &env.cfg.paths.knowledge) {
            Some(p) => load_knowledge(&p)
                .map_err(failure::corpus)?
                .entries
                .into_iter()
                .map(|e| e.snippet)
                .collect(),
            None => Vec::new(),
        };
        let top_n = args.top_n.unwrap_or(env.cfg.vocab.top_n);
        if top_n == 0 {
            return Err(Failure::config(anyhow!("top_n must be at least 1")));
        }
        build_prompt_vocabulary(&explanations, &snippets, top_n).map_err(failure::detection)?
    };
    let out = match &args.out {
        Some(p) => p.clone(),
        None => env.out_file(VOCAB_FILE)?,
    };
    vocab.save(&out).map_err(failure::detection)?;
    println!("{} term(s) written to {}", vocab.terms.len(), out.display());
    for t in &vocab.terms {
        println!("  {t}");
    }
    Ok(())
}

fn cmd_index(env: &Env, args: &IndexArgs) -> Outcome {
    let kb_path = required(env.pick(&args.knowledge, &env.cfg.paths.knowledge), "knowledge manifest")?;
    let encoder: Box<dyn EncoderBackend> = match &args.encoder_endpoint {
        Some(endpoint) => {
            let (id, dim, text, mut connection) = match &env.cfg.backends.encoder {
                EncoderSpec::Remote {
                    encoder_id,
                    dim,
                    supports_text,
                    connection,
                } => (Some(encoder_id.clone()), *dim, *supports_text, connection.clone()),
                EncoderSpec::Mock { .. } => (None, DEFAULT_DIM, false, BackendConfig::new(endpoint.clone())),
            };
            connection.endpoint = endpoint.clone();
            let id = args
                .encoder_id
                .clone()
                .or(id)
                .ok_or_else(|| Failure::config(anyhow!("--encoder-endpoint needs --encoder-id or a remote encoder config")))?;
            Box::new(RemoteEncoder::new(connection, id, dim, text).map_err(Failure::config)?)
        }
        None => env.cfg.encoder().map_err(Failure::config)?,
    };
    let kb = load_knowledge(&kb_path).map_err(failure::corpus)?;
    let index = build_index(&kb, encoder.as_ref()).map_err(failure::index)?;
    let out = match env.pick(&args.out, &env.cfg.paths.index) {
        Some(p) => p,
        None => env.out_file(INDEX_FILE)?,
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))
            .map_err(Failure::backend)?;
    }
    save_index(&index, &out).map_err(failure::index)?;
    println!(
        "indexed {} entries (dim {}, encoder {}) into {}",
        index.len(),
        index.dim,
        index.encoder_id,
        out.display()
    );
    Ok(())
}

fn apply_mode(settings: &mut georeason_core::reasoning::PipelineSettings, mode: &str) -> Outcome {
    let (detection, retrieval) = match mode.trim().to_ascii_uppercase().as_str() {
        "P" => (false, false),
        "P+VC" => (true, false),
        "P+VC+K" => (true, true),
        other => return Err(Failure::config(anyhow!("unknown mode `{other}` (expected P, P+VC or P+VC+K)"))),
    };
    settings.stages.detection = detection;
    settings.stages.retrieval = retrieval;
    Ok(())
}

fn existing(path: Option<PathBuf>, what: &str) -> Result<PathBuf, Failure> {
    let p = required(path, what)?;
    if !p.exists() {
        return Err(Failure::config(anyhow!("{what} {} does not exist", p.display())));
    }
    Ok(p)
}

fn cmd_run(env: &Env, args: &RunArgs) -> Outcome {
    let cfg = &env.cfg;
    let mut settings = cfg.settings();
    if let Some(mode) = &args.mode {
        apply_mode(&mut settings, mode)?;
    }
    settings.validate().map_err(failure::reasoning)?;
    let stages = settings.stages;

    // Everything that can be checked without touching a backend happens
    // before any work.
    let corpus_path = existing(env.pick(&args.corpus, &cfg.paths.corpus), "corpus manifest")?;
    let vocab_path = cfg.path(&cfg.paths.vocabulary);
    let (index_path, kb_path) = if stages.retrieval {
        (
            Some(existing(cfg.path(&cfg.paths.index), "index file")?),
            Some(existing(cfg.path(&cfg.paths.knowledge), "knowledge manifest")?),
        )
    } else {
        (None, None)
    };
    if cfg.backends.generator.is_none() {
        return Err(Failure::config(anyhow!("backends.generator is not configured")));
    }
    let mut registry = TemplateRegistry::builtin();
    if let Some(dir) = cfg.path(&cfg.paths.templates) {
        registry.load_dir(&dir).map_err(failure::reasoning)?;
    }
    registry.get(&settings.template_id).map_err(failure::reasoning)?;

    let vocabulary = match (&vocab_path, stages.detection) {
        (_, false) => None,
        (Some(p), true) => Some(DetectionPromptVocabulary::load(p).map_err(|e| Failure::config(anyhow!(e)))?),
        (None, true) => Some(DetectionPromptVocabulary::default_terms()),
    };
    let corpus = load_corpus(&corpus_path).map_err(failure::corpus)?;
    let knowledge = kb_path.as_deref().map(load_knowledge).transpose().map_err(failure::corpus)?;
    let index = index_path.as_deref().map(load_index).transpose().map_err(failure::index)?;

    let detector = cfg.detector().map_err(Failure::config)?;
    let encoder = cfg.encoder().map_err(Failure::config)?;
    let generator = cfg.generator(&corpus).map_err(Failure::config)?;

    let work_dir = env.output_dir.join("work");
    let ctx = PipelineContext::new(PipelineResources {
        settings,
        backends: Backends {
            detector: detector.as_ref(),
            encoder: encoder.as_ref(),
            generator: generator.as_ref(),
        },
        registry,
        vocabulary: vocabulary.as_ref(),
        index: index.as_ref(),
        knowledge: knowledge.as_ref(),
        image_root: corpus.image_root.clone(),
        work_dir,
    })
    .map_err(failure::reasoning)?;

    let records = run_batch(&corpus.samples, &ctx, cfg.run.concurrency).map_err(failure::reasoning)?;
    write_results(&env.out_file(RESULTS_FILE)?, &records)?;

    let count = |st: PredictionStatus| records.iter().filter(|r| r.status == st).count();
    let (ok, unparsed, failed) = (
        count(PredictionStatus::Ok),
        count(PredictionStatus::ParseFailure),
        count(PredictionStatus::Failed),
    );
    let manifest = json!({
        "config_hash": ctx.config_hash(),
        "mode": stages.mode(),
        "template_id": ctx.settings().template_id,
        "model_id": generator.model_id(),
        "encoder_id": encoder.encoder_id(),
        "seed": cfg.run.seed,
        "samples": records.len(),
        "ok": ok,
        "parse_failure": unparsed,
        "failed": failed,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_text(&env.out_file(RUN_MANIFEST_FILE)?, &text)?;

    println!(
        "{} record(s) written to {}: {ok} ok, {unparsed} unparsed, {failed} failed",
        records.len(),
        env.output_dir.join(RESULTS_FILE).display()
    );
    if ok < records.len() {
        eprintln!("warning: {} of {} record(s) did not produce a parsed answer", records.len() - ok, records.len());
        for r in records.iter().filter(|r| r.status != PredictionStatus::Ok).take(5) {
            eprintln!("  {}: {}", r.sample_id, r.errors.first().map_or("unparsable output", String::as_str));
        }
    }
    Ok(())
}

/// One ordered writer for all records.
fn write_results(path: &Path, records: &[PredictionRecord]) -> Outcome {
    let file = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))
        .map_err(Failure::backend)?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}")
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::backend)?;
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::backend)
}

fn read_results(path: &Path) -> Result<Vec<PredictionRecord>, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::backend)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(no, l)| {
            serde_json::from_str(l)
                .with_context(|| format!("{} line {}", path.display(), no + 1))
                .map_err(Failure::data)
        })
        .collect()
}

fn cmd_evaluate(env: &Env, args: &EvaluateArgs) -> Outcome {
    let cfg = &env.cfg;
    let results = args.results.clone().unwrap_or_else(|| env.output_dir.join(RESULTS_FILE));
    let corpus_path = required(env.pick(&args.corpus, &cfg.paths.corpus), "corpus manifest")?;
    let mut aliases = AliasTable::default_countries();
    if let Some(p) = cfg.path(&cfg.paths.aliases) {
        let extra = AliasTable::from_file(&p).map_err(failure::evaluation)?;
        aliases.extend(&extra).map_err(failure::evaluation)?;
    }
    let encoder = if cfg.evaluation.bertscore {
        Some(cfg.encoder().map_err(Failure::config)?)
    } else {
        None
    };

    let predictions = read_results(&results)?;
    let corpus = load_corpus(&corpus_path).map_err(failure::corpus)?;
    let eval_cfg = EvalConfig {
        mode: cfg.evaluation.mode,
        threshold: cfg.evaluation.threshold,
        aliases,
        bertscore_encoder: encoder.as_deref(),
    };
    let out = evaluate_run(&predictions, &corpus, &eval_cfg).map_err(failure::evaluation)?;
    fs::create_dir_all(&env.output_dir)
        .with_context(|| format!("creating {}", env.output_dir.display()))
        .map_err(Failure::backend)?;
    write_reports(&env.output_dir, &out, cfg.evaluation.scale).map_err(failure::evaluation)?;
    print!("{}", render_report(&out, cfg.evaluation.scale));
    Ok(())
}
