#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use georeason_core::digest::sha256_hex;
use georeason_core::testkit::SyntheticWorld;
use tempfile::TempDir;

/// A synthetic world under `<tmp>/world` and a config file at `<tmp>/georeason.toml`.
pub struct Setup {
    pub dir: TempDir,
    pub world: SyntheticWorld,
    pub config: PathBuf,
}

pub const BASE_CONFIG: &str = r#"
[paths]
corpus = "world/corpus.jsonl"
knowledge = "world/knowledge.jsonl"
index = "out/knowledge.idx"

[run]
output_dir = "out"
concurrency = 2
seed = 7

[backends.detector]
kind = "mock"
fixture = "world/detections.json"

[backends.encoder]
kind = "mock"
dim = 16

[backends.generator]
kind = "mock"
mode = "echo_template"
"#;

impl Setup {
    pub fn new(samples: usize, extra: &str) -> Setup {
        Self::with_config(samples, &format!("{BASE_CONFIG}\n{extra}"))
    }

    pub fn with_config(samples: usize, config: &str) -> Setup {
        let dir = tempfile::tempdir().unwrap();
        let world = SyntheticWorld::build(&dir.path().join("world"), samples, 4);
        let path = dir.path().join("georeason.toml");
        fs::write(&path, config).unwrap();
        Setup {
            dir,
            world,
            config: path,
        }
    }

    pub fn root(&self) -> &Path {
        self.dir.path()
    }

    pub fn out(&self) -> PathBuf {
        self.root().join("out")
    }

    /// Runs the CLI in-process with `--config` prepended.
    pub fn run(&self, args: &[&str]) -> i32 {
        let mut argv = vec!["georeason".to_string(), "--config".into(), self.config.display().to_string()];
        argv.extend(args.iter().map(|s| s.to_string()));
        georeason_cli::run(argv)
    }

    pub fn read(&self, rel: &str) -> String {
        fs::read_to_string(self.root().join(rel)).unwrap()
    }

    pub fn digest(&self, rel: &str) -> String {
        sha256_hex(&fs::read(self.root().join(rel)).unwrap())
    }
}

pub fn jsonl(text: &str) -> Vec<serde_json::Value> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).unwrap()).collect()
}
