//! Per-stage run metadata and config-hash chaining between stages.
//!
//! Every stage writes `<stage>.meta.json`, whose content depends only on the
//! inputs and the config, and `<stage>.timings.json` with wall-clock timings.
//! A stage's config hash covers its own settings and its upstream stage's
//! hash, so a downstream stage can tell whether its input files were
//! produced under the settings it is about to assume.

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::io::{hex_digest, read_json, write_json};
use hotspot_core::ensemble::MemberSummary;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub stage: String,
    pub software_version: String,
    pub config_hash: String,
    pub upstream_hash: Option<String>,
    pub seed: u64,
    pub config: Value,
    /// Input file name to SHA-256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name to SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub median_y: Option<f64>,
    pub members: Vec<MemberSummary>,
    pub warnings: Vec<String>,
    pub details: Value,
}

impl RunMetadata {
    pub fn new(stage: &str, cfg: &PipelineConfig, config_hash: String, upstream_hash: Option<String>) -> Result<Self> {
        Ok(RunMetadata {
            stage: stage.to_string(),
            software_version: VERSION.to_string(),
            config_hash,
            upstream_hash,
            seed: cfg.seed()?,
            config: cfg.snapshot(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            median_y: None,
            members: Vec::new(),
            warnings: Vec::new(),
            details: Value::Null,
        })
    }

    pub fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warnings.push(message);
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.inputs.insert(name, crate::io::sha256_file(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) -> Result<()> {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.outputs.insert(name, crate::io::sha256_file(path)?);
        Ok(())
    }

    pub fn path(dir: &Path, stage: &str) -> std::path::PathBuf {
        dir.join(format!("{stage}.meta.json"))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&Self::path(dir, &self.stage), self)
    }

    pub fn read(dir: &Path, stage: &str) -> Result<Self> {
        read_json(&Self::path(dir, stage))
    }
}

/// Wall-clock timings of a stage, kept apart from the deterministic metadata.
#[derive(Debug, Serialize)]
pub struct Timings {
    stage: String,
    threads: usize,
    seconds: BTreeMap<String, f64>,
    #[serde(skip)]
    last: Option<Instant>,
}

impl Timings {
    pub fn start(stage: &str) -> Self {
        Timings {
            stage: stage.to_string(),
            threads: rayon::current_num_threads(),
            seconds: BTreeMap::new(),
            last: Some(Instant::now()),
        }
    }

    /// Records the time since the previous mark under `step`.
    pub fn mark(&mut self, step: &str) {
        let now = Instant::now();
        if let Some(t) = self.last {
            *self.seconds.entry(step.to_string()).or_default() += (now - t).as_secs_f64();
        }
        self.last = Some(now);
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(format!("{}.timings.json", self.stage)), self)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config sections serialize")
}

/// SHA-256 over the stage name, the upstream hash and the given settings.
pub fn stage_hash(stage: &str, upstream: Option<&str>, parts: &[Value]) -> String {
    let doc = json!({"stage": stage, "upstream": upstream, "settings": parts});
    hex_digest(doc.to_string().as_bytes())
}

impl PipelineConfig {
    pub fn ingest_hash(&self) -> String {
        stage_hash("ingest", None, &[to_value(&self.columns), to_value(&self.cleaning), to_value(&self.diagnostics)])
    }

    pub fn normalize_hash(&self) -> String {
        stage_hash("normalize", Some(&self.ingest_hash()), &[to_value(&self.normalization)])
    }

    pub fn window_sweep_hash(&self) -> String {
        stage_hash("window-sweep", Some(&self.ingest_hash()), &[to_value(&self.diagnostics)])
    }

    pub fn fit_score_hash(&self) -> String {
        stage_hash(
            "fit-score",
            Some(&self.normalize_hash()),
            &[to_value(&self.seed), to_value(&self.grid), to_value(&self.ensemble), to_value(&self.hotspot)],
        )
    }

    pub fn simulate_hash(&self) -> String {
        stage_hash("simulate", None, &[to_value(&self.seed), to_value(&self.grid), to_value(&self.simulation)])
    }

    pub fn evaluate_hash(&self) -> String {
        stage_hash(
            "evaluate",
            Some(&self.simulate_hash()),
            &[
                to_value(&self.seed),
                to_value(&self.normalization),
                to_value(&self.grid),
                to_value(&self.ensemble),
                to_value(&self.hotspot),
                to_value(&self.evaluation),
            ],
        )
    }

    /// Config as written, with paths relative to the config file's directory.
    pub fn snapshot(&self) -> Value {
        let mut c = self.clone();
        if let Some(base) = self.base_dir.clone() {
            let rel = |p: &mut std::path::PathBuf| {
                if let Ok(r) = p.strip_prefix(&base) {
                    *p = r.to_path_buf();
                }
            };
            let paths = &mut c.paths;
            paths.inputs.iter_mut().for_each(rel);
            rel(&mut paths.output_dir);
            for p in [&mut paths.raster, &mut paths.road_nodes, &mut paths.road_edges, &mut paths.station].into_iter().flatten() {
                rel(p);
            }
        }
        to_value(&c)
    }
}

/// Loads the upstream stage's metadata from `dir` and checks that it was
/// produced under `expected_hash`. With `allow_stale` a mismatch or missing
/// metadata is only a warning.
pub fn check_upstream(dir: &Path, stage: &str, expected_hash: &str, allow_stale: bool, meta: &mut RunMetadata) -> Result<()> {
    let problem = match RunMetadata::read(dir, stage) {
        Ok(up) if up.config_hash == expected_hash => return Ok(()),
        Ok(up) => format!(
            "{stage} outputs in {} were produced with config hash {} but the current config implies {expected_hash}; rerun {stage}",
            dir.display(),
            up.config_hash
        ),
        Err(_) => format!("no {stage} metadata in {}; run {stage} first", dir.display()),
    };
    if allow_stale {
        meta.warn(format!("{problem} (ignored)"));
        Ok(())
    } else {
        Err(Error::Config(problem))
    }
}
