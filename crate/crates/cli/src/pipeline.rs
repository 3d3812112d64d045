//! Stage scheduling, prerequisite checks, digest stamps and the output lock.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use gptatlas_core::corpus::{file_digest, Provenance};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::{stages, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Stage {
    Ingest,
    Link,
    Geocode,
    Label,
    Relate,
    Metrics,
    Regress,
    Report,
}

impl Stage {
    /// Dependency order, as run by `all`.
    pub const ORDER: [Stage; 8] = [
        Stage::Ingest,
        Stage::Link,
        Stage::Geocode,
        Stage::Label,
        Stage::Relate,
        Stage::Metrics,
        Stage::Regress,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Link => "link",
            Stage::Geocode => "geocode",
            Stage::Label => "label",
            Stage::Relate => "relate",
            Stage::Metrics => "metrics",
            Stage::Regress => "regress",
            Stage::Report => "report",
        }
    }

    /// Artifacts that must exist before the stage runs.
    pub fn prerequisites(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest | Stage::Report => &[],
            Stage::Link | Stage::Label => &[INGEST_REPORT],
            Stage::Geocode => &[LINKED_CORPUS],
            Stage::Relate => &[LABELED_CORPUS],
            Stage::Metrics => &[LABELED_CORPUS, ACTIVITY_MATRIX],
            Stage::Regress => &[LABELED_CORPUS, ACTIVITY_MATRIX, RELATEDNESS_MATRIX],
        }
    }
}

pub const INGEST_REPORT: &str = "ingest_report";
pub const LINKED_CORPUS: &str = "linked_corpus";
pub const ACTIVITY_MATRIX: &str = "activity_matrix";
pub const LABELED_CORPUS: &str = "labeled_corpus";
pub const RELATEDNESS_MATRIX: &str = "relatedness_matrix";
pub const CLASSIFIER: &str = "classifier";
pub const METRICS_TABLES: &str = "metrics_tables";
pub const FEATURE_TABLE: &str = "feature_table";
pub const MODEL_REPORT: &str = "model_report";
pub const MODEL_SUITE: &str = "model_suite";

/// Every artifact with the stage that writes it.
pub const ARTIFACTS: [(&str, Stage); 10] = [
    (INGEST_REPORT, Stage::Ingest),
    (LINKED_CORPUS, Stage::Link),
    (ACTIVITY_MATRIX, Stage::Geocode),
    (LABELED_CORPUS, Stage::Label),
    (RELATEDNESS_MATRIX, Stage::Relate),
    (CLASSIFIER, Stage::Relate),
    (METRICS_TABLES, Stage::Metrics),
    (FEATURE_TABLE, Stage::Regress),
    (MODEL_REPORT, Stage::Regress),
    (MODEL_SUITE, Stage::Regress),
];

fn producer(artifact: &str) -> Stage {
    ARTIFACTS.iter().find(|(a, _)| *a == artifact).map(|(_, s)| *s).expect("known artifact")
}

/// Relative path of an artifact inside the output directory.
pub fn artifact_file(name: &str) -> String {
    format!("artifacts/{name}.json")
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub force: bool,
    pub seed: Option<u64>,
}

/// Resolved configuration and the identity of the run inputs.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub config_hash: String,
    pub input_digests: BTreeMap<String, String>,
}

impl Workspace {
    pub fn open(opts: &RunOptions) -> Result<Self, CliError> {
        let mut cfg = RunConfig::load(&opts.config)?;
        if let Some(seed) = opts.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &opts.out {
            cfg.out_dir = out.clone();
        }
        cfg.classifier.seed = cfg.seed;
        cfg.validate()?;
        let mut input_digests = BTreeMap::new();
        for (label, path) in cfg.inputs.labelled() {
            let d = file_digest(path).map_err(|e| CliError::Validation(e.to_string()))?;
            input_digests.insert(label.to_string(), d);
        }
        Ok(Self {
            out: cfg.out_dir.clone(),
            config_hash: cfg.hash(),
            cfg,
            input_digests,
        })
    }

    pub fn path(&self, relative: &str) -> PathBuf {
        self.out.join(relative)
    }

    pub fn artifact_path(&self, name: &str) -> PathBuf {
        self.path(&artifact_file(name))
    }

    pub fn has_artifact(&self, name: &str) -> bool {
        self.artifact_path(name).is_file()
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.config_hash.clone(),
            input_digests: self.input_digests.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Stamp {
    stage: String,
    key: String,
    /// Relative output path → SHA-256 of its bytes.
    outputs: BTreeMap<String, String>,
}

fn stamp_path(ws: &Workspace, stage: Stage) -> PathBuf {
    ws.path(&format!("stamps/{}.json", stage.name()))
}

fn read_stamp(ws: &Workspace, stage: Stage) -> Option<Stamp> {
    let bytes = fs::read(stamp_path(ws, stage)).ok()?;
    serde_json::from_slice(&bytes).ok()
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of everything a stage reads: parameters, inputs and the artifacts
/// it consumes. The report stage reads whatever artifacts exist.
fn stage_key(ws: &Workspace, stage: Stage) -> Result<String, CliError> {
    let consumed: Vec<&str> = match stage {
        Stage::Report => ARTIFACTS.iter().map(|(a, _)| *a).filter(|a| ws.has_artifact(a)).collect(),
        s => s.prerequisites().to_vec(),
    };
    let mut artifacts = BTreeMap::new();
    for a in consumed {
        let d = file_digest(&ws.artifact_path(a)).map_err(|e| anyhow::anyhow!(e))?;
        artifacts.insert(a, d);
    }
    let doc = serde_json::json!({
        "stage": stage.name(),
        "config_hash": ws.config_hash,
        "inputs": ws.input_digests,
        "artifacts": artifacts,
    });
    Ok(sha256_hex(&serde_json::to_vec(&doc).expect("json serializes")))
}

fn up_to_date(ws: &Workspace, stage: Stage, key: &str) -> bool {
    let Some(stamp) = read_stamp(ws, stage) else {
        return false;
    };
    stamp.key == key
        && stamp
            .outputs
            .iter()
            .all(|(rel, digest)| fs::read(ws.path(rel)).map_or(false, |b| &sha256_hex(&b) == digest))
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Exclusive ownership of an output directory for the life of a run.
struct OutputLock(PathBuf);

impl OutputLock {
    fn acquire(out: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let path = out.join(".gptatlas.lock");
        fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .with_context(|| format!("output directory is in use (lock file {}; remove it if stale)", path.display()))?;
        Ok(Self(path))
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    Skipped,
}

fn run_one(ws: &Workspace, stage: Stage, force: bool) -> Result<StageOutcome, CliError> {
    for &artifact in stage.prerequisites() {
        if !ws.has_artifact(artifact) {
            return Err(CliError::MissingPrerequisite {
                stage: stage.name(),
                artifact,
                producer: producer(artifact).name(),
            });
        }
    }
    let key = stage_key(ws, stage)?;
    if !force && up_to_date(ws, stage, &key) {
        log::info!("{}: up to date", stage.name());
        return Ok(StageOutcome::Skipped);
    }
    log::info!("{}: running", stage.name());
    let files = stages::run(stage, ws)?;
    let mut outputs = BTreeMap::new();
    for (rel, bytes) in &files {
        write_file(&ws.path(rel), bytes)?;
        outputs.insert(rel.clone(), sha256_hex(bytes));
    }
    if let Some(old) = read_stamp(ws, stage) {
        for rel in old.outputs.keys().filter(|r| !outputs.contains_key(*r)) {
            let _ = fs::remove_file(ws.path(rel));
        }
    }
    let stamp = Stamp {
        stage: stage.name().to_string(),
        key,
        outputs,
    };
    let mut bytes = serde_json::to_vec_pretty(&stamp).expect("stamp serializes");
    bytes.push(b'\n');
    write_file(&stamp_path(ws, stage), &bytes)?;
    Ok(StageOutcome::Ran)
}

/// Runs `stages` in order. With `force` every listed stage reruns even when
/// its stamp matches.
pub fn run(stages: &[Stage], opts: &RunOptions) -> Result<Vec<(Stage, StageOutcome)>, CliError> {
    let ws = Workspace::open(opts)?;
    let _lock = OutputLock::acquire(&ws.out)?;
    let mut done = Vec::new();
    for &stage in stages {
        done.push((stage, run_one(&ws, stage, opts.force)?));
    }
    Ok(done)
}
