//! Experiment configuration: per-experiment defaults, JSON files and
//! `key=value` overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::classifier::{LossConfig, ModelKind};
use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GenData,
    Train,
    BpScan,
    NcSweep,
    TempSweep,
    ImbalanceSweep,
    CurseSweep,
    HaarBaseline,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::GenData,
        Experiment::Train,
        Experiment::BpScan,
        Experiment::NcSweep,
        Experiment::TempSweep,
        Experiment::ImbalanceSweep,
        Experiment::CurseSweep,
        Experiment::HaarBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::GenData => "gen-data",
            Experiment::Train => "train",
            Experiment::BpScan => "bp-scan",
            Experiment::NcSweep => "nc-sweep",
            Experiment::TempSweep => "temp-sweep",
            Experiment::ImbalanceSweep => "imbalance-sweep",
            Experiment::CurseSweep => "curse-sweep",
            Experiment::HaarBaseline => "haar-baseline",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Blobs2,
    Blobs8,
    Tetrominoes,
}

impl Preset {
    pub fn default_learning_rate(self) -> f64 {
        match self {
            Preset::Blobs2 | Preset::Blobs8 => 0.05,
            Preset::Tetrominoes => 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub preset: Preset,
    /// Generator size; `null` keeps the preset size.
    pub n_samples: Option<usize>,
    /// Blob spread; `null` keeps the preset value.
    pub sigma: Option<f64>,
    /// Balanced subsample size before splitting; `null` keeps everything.
    pub cap: Option<usize>,
    /// Classes to keep, relabelled in the listed order.
    pub classes: Option<Vec<usize>>,
    /// Average consecutive groups of this many features.
    pub pool: Option<usize>,
    pub split: f64,
    /// Read a dataset written by `gen-data` instead of generating one.
    pub path: Option<PathBuf>,
    /// Data seed; `null` uses the top-level seed.
    pub seed: Option<u64>,
}

impl DatasetConfig {
    fn preset(preset: Preset) -> Self {
        Self {
            preset,
            n_samples: None,
            sigma: None,
            cap: match preset {
                Preset::Tetrominoes => None,
                _ => Some(500),
            },
            classes: None,
            pool: None,
            split: 0.75,
            path: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub temperature: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitConfig {
    /// `null` uses one qubit per feature.
    pub n_qubits: Option<usize>,
    pub n_layers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kinds: Vec<ModelKind>,
    pub layers: Vec<usize>,
    pub qubits: Vec<usize>,
    pub temperatures: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Random initializations per cell (seed indices `0..seeds`).
    pub seeds: usize,
    /// Parameter draws per loss-variance grid point.
    pub draws: usize,
    /// Samples the loss is averaged over in the loss-variance scan.
    pub batch: usize,
    /// Haar baseline dimensions and pair count.
    pub dims: Vec<usize>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub circuit: CircuitConfig,
    pub train: TrainConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
    pub seed: u64,
}

/// `10^linspace(-3, 1, 8)`.
pub fn default_temperatures() -> Vec<f64> {
    (0..8).map(|i| 10f64.powf(-3.0 + 4.0 * i as f64 / 7.0)).collect()
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let preset = match experiment {
            Experiment::BpScan | Experiment::TempSweep => Preset::Tetrominoes,
            Experiment::ImbalanceSweep => Preset::Blobs8,
            _ => Preset::Blobs2,
        };
        let mut dataset = DatasetConfig::preset(preset);
        if preset == Preset::Tetrominoes {
            // Pairs of horizontally adjacent pixels: 16 features become 8.
            dataset.pool = Some(2);
        }
        if experiment == Experiment::BpScan {
            dataset.classes = Some(vec![0, 1, 2]);
        }
        let n_layers = match experiment {
            Experiment::TempSweep | Experiment::ImbalanceSweep => 5,
            Experiment::CurseSweep => 3,
            _ => 4,
        };
        let kind = match experiment {
            Experiment::TempSweep => ModelKind::PauliCE,
            _ => ModelKind::ProjF,
        };
        let kinds = match experiment {
            Experiment::NcSweep => ModelKind::ALL.to_vec(),
            Experiment::TempSweep => vec![ModelKind::PauliCE],
            Experiment::BpScan => vec![ModelKind::PauliF, ModelKind::ProjF],
            _ => ModelKind::COMMUTING.to_vec(),
        };
        let train = TrainConfig {
            learning_rate: preset.default_learning_rate(),
            ..TrainConfig::default()
        };
        Self {
            experiment,
            dataset,
            model: ModelConfig {
                kind,
                temperature: LossConfig::DEFAULT_TEMPERATURE,
                lambda: LossConfig::DEFAULT_LAMBDA,
            },
            circuit: CircuitConfig {
                n_qubits: None,
                n_layers,
            },
            train,
            sweep: SweepConfig {
                kinds,
                layers: match experiment {
                    Experiment::BpScan | Experiment::NcSweep => (1..=6).collect(),
                    _ => vec![n_layers],
                },
                qubits: match experiment {
                    Experiment::BpScan => vec![8],
                    _ => (2..=10).collect(),
                },
                temperatures: default_temperatures(),
                ratios: vec![1.0, 0.5, 0.2, 0.1, 0.05],
                seeds: 5,
                draws: 100,
                batch: 128,
                dims: vec![2, 16, 256],
                samples: 10_000,
            },
            output: OutputConfig {
                dir: PathBuf::from(format!("runs/{experiment}")),
            },
            seed: 0,
        }
    }

    /// Defaults for `experiment`, overlaid with the optional JSON file and
    /// then the `key=value` overrides.
    pub fn load(experiment: Experiment, path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut user = Value::Object(Map::new());
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            user = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("invalid JSON in {}: {e}", path.display())))?;
            if !user.is_object() {
                return Err(Error::Config(format!("{} must hold a JSON object", path.display())));
            }
        }
        for o in overrides {
            apply_override(&mut user, o)?;
        }
        if let Some(e) = user.get("experiment") {
            let named: Experiment = serde_json::from_value(e.clone())
                .map_err(|err| Error::Config(format!("invalid experiment: {err}")))?;
            if named != experiment {
                return Err(Error::Config(format!(
                    "config is for {named}, but the command runs {experiment}"
                )));
            }
        }
        let mut merged = serde_json::to_value(Self::defaults(experiment))?;
        let lr_given = user.pointer("/train/learning_rate").is_some();
        merge(&mut merged, user);
        let mut cfg: Self =
            serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        if !lr_given {
            cfg.train.learning_rate = cfg.dataset.preset.default_learning_rate();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let s = &self.sweep;
        let grids_needed: &[(&str, bool)] = match self.experiment {
            Experiment::BpScan => &[("kinds", s.kinds.is_empty()), ("layers", s.layers.is_empty()), ("qubits", s.qubits.is_empty())],
            Experiment::NcSweep => &[("kinds", s.kinds.is_empty()), ("layers", s.layers.is_empty())],
            Experiment::TempSweep => &[("kinds", s.kinds.is_empty()), ("temperatures", s.temperatures.is_empty())],
            Experiment::ImbalanceSweep => &[("kinds", s.kinds.is_empty()), ("ratios", s.ratios.is_empty())],
            Experiment::CurseSweep => &[("kinds", s.kinds.is_empty()), ("qubits", s.qubits.is_empty())],
            Experiment::HaarBaseline => &[("dims", s.dims.is_empty())],
            _ => &[],
        };
        if let Some((name, _)) = grids_needed.iter().find(|(_, empty)| *empty) {
            return Err(Error::Config(format!("sweep.{name} must not be empty")));
        }
        if self.experiment != Experiment::HaarBaseline && self.experiment != Experiment::BpScan && s.seeds == 0 {
            return bad("sweep.seeds must be at least 1");
        }
        if self.experiment == Experiment::BpScan && (s.draws < 2 || s.batch == 0) {
            return bad("sweep.draws must be at least 2 and sweep.batch at least 1");
        }
        if self.experiment == Experiment::HaarBaseline && s.samples == 0 {
            return bad("sweep.samples must be at least 1");
        }
        if !(self.dataset.split > 0.0 && self.dataset.split < 1.0) {
            return bad("dataset.split must be in (0, 1)");
        }
        if self.circuit.n_layers == 0 || s.layers.contains(&0) {
            return bad("layer counts must be positive");
        }
        if s.qubits.contains(&0) || self.circuit.n_qubits == Some(0) {
            return bad("qubit counts must be positive");
        }
        if s.temperatures.iter().any(|t| !(*t > 0.0)) || !(self.model.temperature > 0.0) {
            return bad("temperatures must be positive");
        }
        if !(self.model.lambda >= 0.0) {
            return bad("model.lambda must be non-negative");
        }
        if s.ratios.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return bad("imbalance ratios must be in (0, 1]");
        }
        if self.experiment == Experiment::ImbalanceSweep && self.dataset.cap.is_none() {
            return bad("imbalance-sweep needs dataset.cap as the resampled total");
        }
        if self.train.epochs == 0 {
            return bad("train.epochs must be at least 1");
        }
        Ok(())
    }
}

/// Sets a dotted path in a JSON object; the value is parsed as JSON and
/// falls back to a plain string.
pub fn apply_override(target: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("invalid override key {key:?}")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = target;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?} descends into a non-object")))?;
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    node.as_object_mut()
        .ok_or_else(|| Error::Config(format!("override {key:?} descends into a non-object")))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Recursive object merge; non-object values in `overlay` replace.
fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for e in Experiment::ALL {
            ExperimentConfig::defaults(e).validate().unwrap();
            let back = ExperimentConfig::load(e, None, &[]).unwrap();
            assert_eq!(back, ExperimentConfig::defaults(e));
        }
    }

    #[test]
    fn temperature_grid() {
        let t = default_temperatures();
        assert_eq!(t.len(), 8);
        assert!((t[0] - 1e-3).abs() < 1e-15 && (t[7] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn overrides() {
        let cfg = ExperimentConfig::load(
            Experiment::BpScan,
            None,
            &["circuit.n_qubits=6".into(), "sweep.layers=[1,3]".into(), "output.dir=/tmp/x".into()],
        )
        .unwrap();
        assert_eq!(cfg.circuit.n_qubits, Some(6));
        assert_eq!(cfg.sweep.layers, vec![1, 3]);
        assert_eq!(cfg.output.dir, PathBuf::from("/tmp/x"));
        assert!(ExperimentConfig::load(Experiment::Train, None, &["nope".into()]).is_err());
        assert!(ExperimentConfig::load(Experiment::Train, None, &["model.bogus=1".into()]).is_err());
        assert!(ExperimentConfig::load(Experiment::Train, None, &["sweep.seeds=0".into()]).is_err());
        assert!(ExperimentConfig::load(Experiment::Train, None, &["experiment=bp-scan".into()]).is_err());
    }

    #[test]
    fn learning_rate_follows_the_dataset() {
        let cfg = ExperimentConfig::load(Experiment::Train, None, &["dataset.preset=tetrominoes".into()]).unwrap();
        assert_eq!(cfg.train.learning_rate, 0.01);
        let cfg = ExperimentConfig::load(
            Experiment::Train,
            None,
            &["dataset.preset=tetrominoes".into(), "train.learning_rate=0.2".into()],
        )
        .unwrap();
        assert_eq!(cfg.train.learning_rate, 0.2);
    }

    #[test]
    fn config_files() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("missing.json");
        let err = ExperimentConfig::load(Experiment::Train, Some(&missing), &[]).unwrap_err();
        assert!(err.is_config() && err.to_string().contains("missing.json"));
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"experiment": "train", "circuit": {"n_layers": 2}, "seed": 7}"#).unwrap();
        let cfg = ExperimentConfig::load(Experiment::Train, Some(&path), &["seed=9".into()]).unwrap();
        assert_eq!((cfg.circuit.n_layers, cfg.seed), (2, 9));
        std::fs::write(&path, r#"{"unknown": 1}"#).unwrap();
        assert!(ExperimentConfig::load(Experiment::Train, Some(&path), &[]).unwrap_err().is_config());
    }
}
