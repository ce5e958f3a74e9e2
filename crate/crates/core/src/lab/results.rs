//! Result rows, CSV schemas and the run manifest.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::classifier::ModelKind;
use crate::error::Result;

pub const BP_HEADER: [&str; 9] = [
    "obs_kind",
    "locality",
    "n_layers",
    "n_qubits",
    "loss",
    "draws",
    "loss_mean",
    "loss_var",
    "theory_proxy",
];

pub const SWEEP_HEADER: [&str; 11] = [
    "model_kind",
    "n_layers",
    "n_qubits",
    "ratio",
    "temperature",
    "seed",
    "train_loss",
    "test_f1",
    "train_f1",
    "intra",
    "inter",
];

/// Extra columns of the qubit sweep, appended to [`SWEEP_HEADER`].
pub const CURSE_EXTRA: [&str; 3] = ["untrained_intra", "untrained_inter", "haar_baseline"];

pub const HAAR_HEADER: [&str; 5] = ["dim", "samples", "mean", "std_err", "expected"];
pub const HAAR_HIST_HEADER: [&str; 5] = ["dim", "bin_lo", "bin_hi", "density", "analytic"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpRow {
    pub obs_kind: String,
    pub locality: usize,
    pub n_layers: usize,
    pub n_qubits: usize,
    pub loss: String,
    pub draws: usize,
    pub loss_mean: f64,
    pub loss_var: f64,
    pub theory_proxy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model_kind: ModelKind,
    pub n_layers: usize,
    pub n_qubits: usize,
    pub ratio: Option<f64>,
    pub temperature: Option<f64>,
    pub seed: usize,
    pub train_loss: f64,
    pub test_f1: f64,
    pub train_f1: f64,
    pub intra: f64,
    pub inter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurseRow {
    pub model_kind: ModelKind,
    pub n_layers: usize,
    pub n_qubits: usize,
    pub ratio: Option<f64>,
    pub temperature: Option<f64>,
    pub seed: usize,
    pub train_loss: f64,
    pub test_f1: f64,
    pub train_f1: f64,
    pub intra: f64,
    pub inter: f64,
    pub untrained_intra: f64,
    pub untrained_inter: f64,
    pub haar_baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarRow {
    pub dim: usize,
    pub samples: usize,
    pub mean: f64,
    pub std_err: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarHistRow {
    pub dim: usize,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub density: f64,
    pub analytic: f64,
}

/// Writes `header` and then `rows` (serialized in field order).
pub fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub started_at: f64,
    pub finished_at: f64,
    pub wall_time_s: f64,
    pub build: String,
    pub threads: usize,
    pub outputs: Vec<PathBuf>,
    pub rows: usize,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn build_id() -> String {
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    format!("{} {} ({profile})", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let f = std::fs::File::create(dir.join(MANIFEST_FILE))?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let f = std::fs::File::open(dir.join(MANIFEST_FILE))?;
        Ok(serde_json::from_reader(f)?)
    }
}
