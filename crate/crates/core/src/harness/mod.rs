//! Reproducible Monte Carlo experiments.
//!
//! Replication `r` of an experiment draws from its own ChaCha8 stream
//! `(master_seed, r)`, so the records are a pure function of the
//! configuration. Replications run on a rayon pool and are collected in index
//! order; the thread count changes speed only.

mod config;
mod ecdf;
mod experiments;

pub use config::ExperimentConfig;
pub use ecdf::{ks_one_sample, ks_two_sample, Ecdf};
pub use experiments::{
    replay, shift_driver_table, shift_experiment, tightness_probe, DriverRow, ReplayOutcome, ShiftReport,
    TightnessReport, TightnessRow,
};

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::limits::GumbelLaw;
use crate::models::{DistributionSpec, ModelError};
use crate::statistics::{de_statistic, kls_statistic, Mode, SpecSource, StatError, StatRecord, Trajectory};
use crate::truncation::{GammaSequence, TruncationError};

/// Stream offset for the replications of a reference experiment.
pub const REFERENCE_STREAM: u64 = 1 << 63;

pub const CSV_HEADER: [&str; 7] = ["replication_index", "mode", "value", "argmax_k", "n", "d", "seed"];

/// Name of the JSON-lines file that collects experiment summaries.
pub const SUMMARY_FILE: &str = "summary.jsonl";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Truncation(#[from] TruncationError),
    #[error(transparent)]
    Statistic(#[from] StatError),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("replay: {0}")]
    Replay(String),
}

impl HarnessError {
    /// Whether the error stems from the configuration rather than from running it.
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::Config(_) | HarnessError::Model(_))
            || matches!(self, HarnessError::Truncation(e) if !matches!(e, TruncationError::Singular { .. }))
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
        move |source| HarnessError::Io { path: path.to_path_buf(), source }
    }
}

/// The generator for stream `stream` under `master_seed`.
pub fn child_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Resolved experiment: the law and its normalizer cache.
struct Prepared {
    spec: DistributionSpec,
    gs: GammaSequence,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, HarnessError> {
    let spec = cfg.validate()?;
    let gs = GammaSequence::new(&spec, &cfg.scheme, cfg.horizon())?;
    Ok(Prepared { spec, gs })
}

fn replicate(cfg: &ExperimentConfig, p: &Prepared, stream: u64) -> Result<StatRecord, StatError> {
    let source = SpecSource::new(&p.spec, child_rng(cfg.master_seed, stream));
    let mut traj = Trajectory::new(source, cfg.master_seed);
    match cfg.mode {
        Mode::Kls => kls_statistic(&mut traj, &p.gs, cfg.n, cfg.horizon()),
        mode => de_statistic(&mut traj, &p.gs, mode, cfg.n),
    }
}

fn run_streams(cfg: &ExperimentConfig, stream_base: u64, threads: usize) -> Result<Vec<StatRecord>, HarnessError> {
    let p = prepare(cfg)?;
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| HarnessError::Pool(e.to_string()))?;
    let records = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| replicate(cfg, &p, stream_base | r))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(records)
}

/// All replications of `cfg`, in index order. `threads = 0` uses rayon's default.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<StatRecord>, HarnessError> {
    run_streams(cfg, 0, threads)
}

/// Replications of the reference experiment, on streams disjoint from the main ones.
pub fn run_reference(cfg: &ExperimentConfig, threads: usize) -> Result<Option<Vec<StatRecord>>, HarnessError> {
    match cfg.reference {
        Some(id) => Ok(Some(run_streams(&cfg.reference_config(id)?, REFERENCE_STREAM, threads)?)),
        None => Ok(None),
    }
}

/// Replication `index` alone.
pub fn run_replication(cfg: &ExperimentConfig, index: u64) -> Result<StatRecord, HarnessError> {
    if index >= cfg.replications {
        return Err(HarnessError::Config(format!("index {index} is beyond {} replications", cfg.replications)));
    }
    let p = prepare(cfg)?;
    Ok(replicate(cfg, &p, index)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quantiles {
    pub q01: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    pub q99: f64,
}

impl Quantiles {
    pub fn of(e: &Ecdf) -> Self {
        Quantiles {
            q01: e.quantile(0.01),
            q05: e.quantile(0.05),
            q25: e.quantile(0.25),
            q50: e.quantile(0.50),
            q75: e.quantile(0.75),
            q95: e.quantile(0.95),
            q99: e.quantile(0.99),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub spec_id: String,
    pub scheme_id: String,
    pub mode: Mode,
    pub n: u64,
    pub d: usize,
    pub replications: u64,
    pub master_seed: u64,
    pub quantiles: Quantiles,
    /// Distance to the standard Gumbel law.
    pub ks_gumbel: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_spec_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_median: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_two_sample: Option<f64>,
    pub runtime_seconds: f64,
}

pub fn values(records: &[StatRecord]) -> Ecdf {
    Ecdf::new(records.iter().map(|r| r.value).collect()).expect("statistics are finite and nonempty")
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub records: Vec<StatRecord>,
    pub reference: Option<Vec<StatRecord>>,
    pub summary: Summary,
}

/// Runs the experiment and its reference, and summarizes both.
pub fn run_with_summary(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutcome, HarnessError> {
    let start = Instant::now();
    let records = run_experiment(cfg, threads)?;
    let reference = run_reference(cfg, threads)?;
    let e = values(&records);
    let reference_ecdf = reference.as_deref().map(values);
    let summary = Summary {
        experiment: cfg.name.clone(),
        spec_id: records[0].spec_id.clone(),
        scheme_id: records[0].scheme_id.clone(),
        mode: cfg.mode,
        n: cfg.n,
        d: cfg.dim(),
        replications: cfg.replications,
        master_seed: cfg.master_seed,
        quantiles: Quantiles::of(&e),
        ks_gumbel: ks_one_sample(&e, &GumbelLaw::standard()),
        reference_spec_id: reference.as_ref().map(|r| r[0].spec_id.clone()),
        reference_median: reference_ecdf.as_ref().map(Ecdf::median),
        ks_two_sample: reference_ecdf.as_ref().map(|r| ks_two_sample(&e, r)),
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(ExperimentOutcome { config: cfg.clone(), records, reference, summary })
}

/// The CSV fields of record `index`; floats use the shortest round-trip form.
pub fn csv_row(index: u64, rec: &StatRecord, d: usize) -> [String; 7] {
    [
        index.to_string(),
        rec.mode.name().to_string(),
        rec.value.to_string(),
        rec.argmax_k.to_string(),
        rec.n.to_string(),
        d.to_string(),
        rec.seed.to_string(),
    ]
}

pub fn write_csv(path: &Path, records: &[StatRecord], d: usize) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(HarnessError::io(path))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    w.write_record(CSV_HEADER)?;
    for (i, rec) in records.iter().enumerate() {
        w.write_record(csv_row(i as u64, rec, d))?;
    }
    w.flush().map_err(HarnessError::io(path))?;
    Ok(())
}

/// Rows of a CSV written by [`write_csv`], header checked.
pub fn read_csv(path: &Path) -> Result<Vec<Vec<String>>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(HarnessError::Replay(format!("{} does not have the experiment header", path.display())));
    }
    r.records().map(|row| Ok(row?.iter().map(str::to_string).collect())).collect()
}

pub fn append_jsonl<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut line = serde_json::to_string(value)?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(HarnessError::io(path))?;
    f.write_all(line.as_bytes()).map_err(HarnessError::io(path))
}

pub fn csv_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.csv"))
}

/// Writes `<name>.csv`, `<name>_reference.csv` if there is a reference, and
/// appends the summary to `summary.jsonl`.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    let cfg = &outcome.config;
    let mut written = vec![csv_path(dir, &cfg.name)];
    write_csv(&written[0], &outcome.records, cfg.dim())?;
    if let Some(reference) = &outcome.reference {
        let path = csv_path(dir, &format!("{}_reference", cfg.name));
        write_csv(&path, reference, cfg.dim())?;
        written.push(path);
    }
    let summary = dir.join(SUMMARY_FILE);
    append_jsonl(&summary, &outcome.summary)?;
    written.push(summary);
    Ok(written)
}
