//! Artifact plumbing shared by the command line and examples: run
//! manifests, per-stage diagnostics tables, and the sweep results
//! file. Files are written to a temp sibling and renamed into place so
//! concurrent runs never observe a half-written artifact.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::Metrics;
use crate::mcmc::{McmcConfig, TraceRecord};
use crate::model::Hyperparams;
use crate::smc::{IslandsRun, SmcConfig};

/// Wall-clock seconds per phase. Inference timing excludes prediction,
/// which is reported separately.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Timings {
    pub load_secs: f64,
    pub run_secs: f64,
    pub predict_secs: f64,
}

/// Runs a closure, returning its value and the elapsed seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let value = f();
    (value, start.elapsed().as_secs_f64())
}

/// Shape of the loaded data, echoed into manifests.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DatasetSummary {
    pub train_rows: usize,
    pub test_rows: Option<usize>,
    pub num_dims: usize,
    pub num_classes: usize,
}

pub fn summarize(train: &Dataset, test: Option<&Dataset>) -> DatasetSummary {
    DatasetSummary {
        train_rows: train.n_rows(),
        test_rows: test.map(Dataset::n_rows),
        num_dims: train.n_dims(),
        num_classes: train.num_classes(),
    }
}

/// Resolved configuration and headline results of one run. Together
/// with the dataset files this reproduces the run exactly.
#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub dataset: DatasetSummary,
    pub hyper: &'a Hyperparams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smc: Option<&'a SmcConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcmc: Option<&'a McmcConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_marginal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Metrics>,
    pub timings: Timings,
}

impl<'a> RunManifest<'a> {
    pub fn new(command: &'a str, dataset: DatasetSummary, hyper: &'a Hyperparams) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            dataset,
            hyper,
            smc: None,
            mcmc: None,
            log_marginal: None,
            metrics: None,
            timings: Timings::default(),
        }
    }
}

fn tmp_sibling(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".tmp");
    PathBuf::from(name)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_sibling(path);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn table_err(path: &Path, e: impl Display) -> Error {
    Error::data(path.display().to_string(), e.to_string())
}

/// Writes any serializable value as pretty-printed JSON.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

#[derive(Serialize)]
struct DiagRow {
    island: usize,
    stage: u32,
    ess: f64,
    log_normalizer: f64,
    live_particles: usize,
    resampled: bool,
}

/// One CSV row per (island, stage) with ESS, the running normalizer,
/// how many particles were still incomplete, and the resampling flag.
pub fn write_diagnostics_csv(path: &Path, run: &IslandsRun) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (island, island_run) in run.islands.iter().enumerate() {
        for d in &island_run.diagnostics {
            w.serialize(DiagRow {
                island,
                stage: d.stage,
                ess: d.ess,
                log_normalizer: d.log_normalizer,
                live_particles: d.live_particles,
                resampled: d.resampled,
            })
            .map_err(|e| table_err(path, e))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| table_err(path, e))?;
    write_atomic(path, &bytes)
}

/// Writes the per-iteration chain trace as CSV.
pub fn write_trace_csv(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for record in trace {
        w.serialize(record).map_err(|e| table_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| table_err(path, e))?;
    write_atomic(path, &bytes)
}

/// Short stable fingerprint of a configuration, for joining sweep rows
/// back to the settings that produced them.
pub fn config_hash(config: &SmcConfig, hyper: &Hyperparams) -> String {
    let bytes = serde_json::to_vec(&(config, hyper)).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest[..6].iter().map(|b| format!("{b:02x}")).collect()
}

/// One sweep result. Metric columns stay empty when a run fails so the
/// sweep can continue and still record what happened.
#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub config_hash: String,
    pub particles: usize,
    pub islands: usize,
    pub proposal: String,
    pub expansion: String,
    pub priority: String,
    pub resampler: String,
    pub ess_frac: f64,
    pub max_stages: usize,
    pub seed: u64,
    pub status: String,
    pub log_marginal: Option<f64>,
    pub mean_log_prob: Option<f64>,
    pub accuracy: Option<f64>,
    pub run_secs: Option<f64>,
    pub predict_secs: Option<f64>,
}

impl SweepRow {
    /// Row with the configuration echoed and no results yet.
    pub fn new(config: &SmcConfig, hyper: &Hyperparams) -> Self {
        SweepRow {
            config_hash: config_hash(config, hyper),
            particles: config.num_particles,
            islands: config.num_islands,
            proposal: config.proposal.to_string(),
            expansion: config.expansion.to_string(),
            priority: config.priority.to_string(),
            resampler: config.resampler.to_string(),
            ess_frac: config.ess_threshold_fraction,
            max_stages: config.max_stages,
            seed: config.seed,
            status: "error".to_string(),
            log_marginal: None,
            mean_log_prob: None,
            accuracy: None,
            run_secs: None,
            predict_secs: None,
        }
    }
}

/// Appends one row to a results CSV, writing the header first when the
/// file does not exist yet.
pub fn append_results_row(path: &Path, row: &SweepRow) -> Result<()> {
    let existed = path.exists();
    let file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(!existed)
        .from_writer(file);
    w.serialize(row).map_err(|e| table_err(path, e))?;
    w.flush()?;
    Ok(())
}
