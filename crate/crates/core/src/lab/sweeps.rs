//! Experiment drivers. Every sweep cell is an independent job whose RNG
//! stream depends only on the master seed and the cell's seed index (or, for
//! the loss-variance scan, its circuit size), so results do not depend on
//! scheduling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use super::config::{DatasetConfig, ExperimentConfig, Preset};
use super::neural_collapse::nc_indicators;
use super::results::{BpRow, CurseRow, HaarHistRow, HaarRow, SweepRow};
use crate::circuit::{CircuitSpec, ParamVector};
use crate::classifier::{
    measured_qubits_for, LossConfig, LossKind, Model, ModelKind, ObservableSet, ObservableSetKind,
};
use crate::data::{
    filter_classes, gen_blobs, gen_tetrominoes, pool_features, read_dataset, resample_imbalance,
    scale_features, stratified_subsample, BlobsParams, Dataset, DatasetMeta, Scaler, TETROMINO_PRESET_SIZE,
};
use crate::error::{Error, Result};
use crate::pauli::{
    haar_fidelity_stats, locality_profile, theoretical_variance_proxy,
    uniform_locality_set, Observable, ProjectorObservable, HAAR_BINS,
};
use crate::trainer::{evaluate, split, train, EpochRecord, TrainConfig, TrainOutcome};

/// SplitMix64 finalizer over `master` and `index`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    mix(master ^ mix(index))
}

pub fn data_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.dataset.seed.unwrap_or(cfg.seed)
}

/// The preset generator with size and spread overrides applied, plus its
/// parameters for the sidecar.
pub fn generate_preset(cfg: &DatasetConfig, seed: u64) -> Result<(Dataset, serde_json::Value)> {
    match cfg.preset {
        Preset::Blobs2 | Preset::Blobs8 => {
            let base = if cfg.preset == Preset::Blobs2 {
                BlobsParams::BLOBS2
            } else {
                BlobsParams::BLOBS8
            };
            let params = BlobsParams {
                n_samples: cfg.n_samples.unwrap_or(base.n_samples),
                sigma: cfg.sigma.unwrap_or(base.sigma),
                ..base
            };
            Ok((gen_blobs(&params, seed)?, serde_json::to_value(params)?))
        }
        Preset::Tetrominoes => {
            let n = cfg.n_samples.unwrap_or(TETROMINO_PRESET_SIZE);
            Ok((gen_tetrominoes(n, seed)?, json!({ "n_samples": n })))
        }
    }
}

/// Generated or loaded data after class filtering and feature pooling.
pub fn load_base_dataset(cfg: &DatasetConfig, seed: u64) -> Result<Dataset> {
    let mut ds = match &cfg.path {
        Some(p) => read_dataset(p)?.0,
        None => generate_preset(cfg, seed)?.0,
    };
    if let Some(classes) = &cfg.classes {
        ds = filter_classes(&ds, classes)?;
    }
    if let Some(width) = cfg.pool {
        ds = pool_features(&ds, width)?;
    }
    Ok(ds)
}

/// Sidecar for a dataset made by [`generate_preset`] with `params`, after
/// the configured class filter and pooling.
pub fn dataset_meta(cfg: &DatasetConfig, seed: u64, ds: &Dataset, mut params: serde_json::Value) -> DatasetMeta {
    if let Some(obj) = params.as_object_mut() {
        obj.insert("preset".into(), json!(cfg.preset));
        obj.insert("classes".into(), json!(cfg.classes));
        obj.insert("pool".into(), json!(cfg.pool));
    }
    DatasetMeta {
        name: ds.name.clone(),
        n_classes: ds.n_classes,
        seed,
        params,
    }
}

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    pub scaler: Scaler,
}

/// Base data, subsampled (balanced, or imbalanced when `ratio` is given),
/// split and scaled to `[0, pi]` with training statistics. A balanced cap at
/// or above the dataset size keeps everything.
pub fn prepare_data(cfg: &DatasetConfig, seed: u64, ratio: Option<f64>) -> Result<PreparedData> {
    let base = load_base_dataset(cfg, seed)?;
    let sampled = match (ratio, cfg.cap) {
        (Some(r), Some(cap)) => resample_imbalance(&base, r, cap, seed)?,
        (Some(_), None) => return Err(Error::Config("imbalance resampling needs dataset.cap".into())),
        (None, Some(cap)) if cap < base.len() => stratified_subsample(&base, cap, seed)?,
        (None, _) => base,
    };
    let (train_raw, test_raw) = split(&sampled, cfg.split, seed)?;
    let (train, test, scaler) = scale_features(&train_raw, &test_raw)?;
    Ok(PreparedData { train, test, scaler })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub kind: ModelKind,
    pub n_layers: usize,
    /// `None` uses one qubit per feature.
    pub n_qubits: Option<usize>,
    pub temperature: f64,
    pub lambda: f64,
    pub seed_index: usize,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub n_qubits: usize,
    pub outcome: TrainOutcome,
    pub model: Model,
}

impl CellResult {
    pub fn last(&self) -> &EpochRecord {
        self.outcome.trace.last().expect("training runs at least one epoch")
    }
}

pub fn build_model(cell: &Cell, data: &Dataset) -> Result<Model> {
    let n_features = data.n_features();
    let n_qubits = cell.n_qubits.unwrap_or(n_features);
    let spec = CircuitSpec::new(n_qubits, cell.n_layers, n_features)?;
    Model::for_kind(cell.kind, spec, data.n_classes, cell.temperature, cell.lambda)
}

pub fn run_cell(cell: &Cell, data: &PreparedData, train_cfg: &TrainConfig, master_seed: u64) -> Result<CellResult> {
    let model = build_model(cell, &data.train)?;
    let cfg = TrainConfig {
        seed: derive_seed(master_seed, cell.seed_index as u64),
        ..*train_cfg
    };
    let outcome = train(&model, &data.train, &data.test, &cfg)?;
    Ok(CellResult {
        n_qubits: model.spec().n_qubits,
        outcome,
        model,
    })
}

fn sweep_row(cell: &Cell, res: &CellResult, ratio: Option<f64>, temperature: Option<f64>) -> SweepRow {
    let r = res.last();
    SweepRow {
        model_kind: cell.kind,
        n_layers: cell.n_layers,
        n_qubits: res.n_qubits,
        ratio,
        temperature,
        seed: cell.seed_index,
        train_loss: r.train_loss,
        test_f1: r.test_f1,
        train_f1: r.train_f1,
        intra: r.intra,
        inter: r.inter,
    }
}

fn base_cell(cfg: &ExperimentConfig, kind: ModelKind, seed_index: usize) -> Cell {
    Cell {
        kind,
        n_layers: cfg.circuit.n_layers,
        n_qubits: cfg.circuit.n_qubits,
        temperature: cfg.model.temperature,
        lambda: cfg.model.lambda,
        seed_index,
    }
}

/// One training run at seed index 0; returns its summary row and full trace.
pub fn train_single(cfg: &ExperimentConfig) -> Result<(SweepRow, CellResult)> {
    let data = prepare_data(&cfg.dataset, data_seed(cfg), None)?;
    let cell = base_cell(cfg, cfg.model.kind, 0);
    let res = run_cell(&cell, &data, &cfg.train, cfg.seed)?;
    Ok((sweep_row(&cell, &res, None, None), res))
}

fn run_cells(cells: &[Cell], data: &PreparedData, cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    cells
        .par_iter()
        .map(|c| run_cell(c, data, &cfg.train, cfg.seed))
        .collect()
}

/// Final metrics over model kinds x layer counts x seeds.
pub fn nc_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let data = prepare_data(&cfg.dataset, data_seed(cfg), None)?;
    let mut cells = Vec::new();
    for &kind in &cfg.sweep.kinds {
        for &n_layers in &cfg.sweep.layers {
            for s in 0..cfg.sweep.seeds {
                cells.push(Cell {
                    n_layers,
                    ..base_cell(cfg, kind, s)
                });
            }
        }
    }
    let results = run_cells(&cells, &data, cfg)?;
    Ok(cells.iter().zip(&results).map(|(c, r)| sweep_row(c, r, None, None)).collect())
}

/// Final metrics over softmax temperatures; only cross-entropy kinds apply.
pub fn temp_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    if let Some(k) = cfg.sweep.kinds.iter().find(|k| k.loss() != LossKind::CrossEntropy) {
        return Err(Error::Config(format!("temp-sweep needs cross-entropy kinds, got {k}")));
    }
    let data = prepare_data(&cfg.dataset, data_seed(cfg), None)?;
    let mut cells = Vec::new();
    for &kind in &cfg.sweep.kinds {
        for &t in &cfg.sweep.temperatures {
            for s in 0..cfg.sweep.seeds {
                cells.push(Cell {
                    temperature: t,
                    ..base_cell(cfg, kind, s)
                });
            }
        }
    }
    let results = run_cells(&cells, &data, cfg)?;
    Ok(cells
        .iter()
        .zip(&results)
        .map(|(c, r)| sweep_row(c, r, None, Some(c.temperature)))
        .collect())
}

/// Final metrics over imbalance ratios, each with its own resampled data.
pub fn imbalance_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let seed = data_seed(cfg);
    let datasets = cfg
        .sweep
        .ratios
        .iter()
        .map(|&r| prepare_data(&cfg.dataset, seed, Some(r)))
        .collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for &kind in &cfg.sweep.kinds {
        for (ri, _) in cfg.sweep.ratios.iter().enumerate() {
            for s in 0..cfg.sweep.seeds {
                jobs.push((ri, base_cell(cfg, kind, s)));
            }
        }
    }
    jobs.par_iter()
        .map(|(ri, cell)| {
            let res = run_cell(cell, &datasets[*ri], &cfg.train, cfg.seed)?;
            Ok(sweep_row(cell, &res, Some(cfg.sweep.ratios[*ri]), None))
        })
        .collect()
}

/// Final metrics over qubit counts, with the indicators of the untrained
/// (initial) parameters and the Haar mean fidelity `1 / 2^n`.
pub fn curse_sweep(cfg: &ExperimentConfig) -> Result<Vec<CurseRow>> {
    let data = prepare_data(&cfg.dataset, data_seed(cfg), None)?;
    let mut cells = Vec::new();
    for &kind in &cfg.sweep.kinds {
        for &n in &cfg.sweep.qubits {
            for s in 0..cfg.sweep.seeds {
                cells.push(Cell {
                    n_qubits: Some(n),
                    ..base_cell(cfg, kind, s)
                });
            }
        }
    }
    cells
        .par_iter()
        .map(|cell| {
            let res = run_cell(cell, &data, &cfg.train, cfg.seed)?;
            let untrained = evaluate(&res.model, &res.outcome.initial, &data.train)?;
            let nc0 = nc_indicators(
                &untrained.states,
                &data.train.labels,
                data.train.n_classes,
                cfg.train.centroid,
            )?;
            let row = sweep_row(cell, &res, None, None);
            Ok(CurseRow {
                model_kind: row.model_kind,
                n_layers: row.n_layers,
                n_qubits: row.n_qubits,
                ratio: None,
                temperature: None,
                seed: row.seed,
                train_loss: row.train_loss,
                test_f1: row.test_f1,
                train_f1: row.train_f1,
                intra: row.intra,
                inter: row.inter,
                untrained_intra: nc0.intra,
                untrained_inter: nc0.inter,
                haar_baseline: 0.5f64.powi(row.n_qubits as i32),
            })
        })
        .collect()
}

struct BpCell {
    kind: ModelKind,
    n_qubits: usize,
    n_layers: usize,
    locality: usize,
}

fn bp_observables(kind: ModelKind, n_qubits: usize, locality: usize, n_classes: usize) -> Result<ObservableSet> {
    match kind.observable_kind() {
        ObservableSetKind::PauliCommuting => {
            if n_classes != 3 {
                return Err(Error::Config(format!(
                    "the Pauli locality scan scores 3 classes, the dataset has {n_classes}"
                )));
            }
            let members: Vec<Observable> = uniform_locality_set(n_qubits, locality)?
                .into_iter()
                .map(Observable::from)
                .collect();
            let set_kind = if locality % 2 == 0 {
                ObservableSetKind::PauliCommuting
            } else {
                ObservableSetKind::PauliNonCommuting
            };
            ObservableSet::new(set_kind, members)
        }
        ObservableSetKind::Projector => ObservableSet::projectors_on(locality, n_classes),
        ObservableSetKind::PauliNonCommuting => Err(Error::Config(
            "bp-scan takes Pauli or projector kinds with commuting members".into(),
        )),
    }
}

/// Loss mean and unbiased variance over random parameter draws, per
/// observable locality and layer count. A set `circuit.n_qubits` replaces the
/// `sweep.qubits` grid.
pub fn bp_scan(cfg: &ExperimentConfig) -> Result<Vec<BpRow>> {
    let seed = data_seed(cfg);
    let base = load_base_dataset(&cfg.dataset, seed)?;
    let scaled = Scaler::fit(&base)?.transform(&base)?;
    let mut idx: Vec<usize> = (0..scaled.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(cfg.sweep.batch.min(scaled.len()));
    idx.sort_unstable();
    let batch = scaled.subset(&idx);
    let k = batch.n_classes;

    let qubits = match cfg.circuit.n_qubits {
        Some(n) => vec![n],
        None => cfg.sweep.qubits.clone(),
    };
    let mut cells = Vec::new();
    for &kind in &cfg.sweep.kinds {
        for &n_qubits in &qubits {
            let first = match kind.observable_kind() {
                ObservableSetKind::Projector => measured_qubits_for(k),
                _ => 1,
            };
            for &n_layers in &cfg.sweep.layers {
                for locality in first..=n_qubits {
                    cells.push(BpCell {
                        kind,
                        n_qubits,
                        n_layers,
                        locality,
                    });
                }
            }
        }
    }
    cells
        .par_iter()
        .map(|c| {
            let observables = bp_observables(c.kind, c.n_qubits, c.locality, k)?;
            let spec = CircuitSpec::new(c.n_qubits, c.n_layers, batch.n_features())?;
            let loss = LossConfig::new(c.kind.loss(), cfg.model.temperature, cfg.model.lambda)?;
            let model = Model::new(spec, observables.clone(), loss)?;
            // Draws depend on the circuit only, so every locality at a given
            // size sees the same parameter vectors.
            let stream = derive_seed(derive_seed(cfg.seed, c.n_qubits as u64), c.n_layers as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            let mut losses = Vec::with_capacity(cfg.sweep.draws);
            for _ in 0..cfg.sweep.draws {
                let theta = ParamVector::uniform(&spec, &mut rng);
                let mut total = 0.0;
                for (x, &y) in batch.features.iter().zip(&batch.labels) {
                    total += model.loss(x, y, &theta)?;
                }
                losses.push(total / batch.len() as f64);
            }
            let (mean, var) = mean_and_variance(&losses);
            let zero = ProjectorObservable::new(c.n_qubits, 0)?;
            let state_profile = locality_profile(&zero.into(), c.n_qubits)?;
            let obs_profile = locality_profile(&observables.members()[0], c.n_qubits)?;
            Ok(BpRow {
                obs_kind: match c.kind.observable_kind() {
                    ObservableSetKind::Projector => "projector".into(),
                    _ => "pauli".into(),
                },
                locality: c.locality,
                n_layers: c.n_layers,
                n_qubits: c.n_qubits,
                loss: format!("{:?}", loss.loss),
                draws: losses.len(),
                loss_mean: mean,
                loss_var: var,
                theory_proxy: theoretical_variance_proxy(&state_profile, &obs_profile)?,
            })
        })
        .collect()
}

/// Mean and unbiased sample variance (zero for fewer than two values).
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).max(0.0))
}

/// Sampled Haar fidelity statistics and histograms for each dimension.
pub fn haar_baseline(cfg: &ExperimentConfig) -> Result<(Vec<HaarRow>, Vec<HaarHistRow>)> {
    let results = cfg
        .sweep
        .dims
        .par_iter()
        .enumerate()
        .map(|(i, &d)| haar_fidelity_stats(d, cfg.sweep.samples, derive_seed(cfg.seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut hist = Vec::new();
    for s in results {
        rows.push(HaarRow {
            dim: s.dim,
            samples: s.samples,
            mean: s.mean,
            std_err: s.std_err,
            expected: 1.0 / s.dim as f64,
        });
        let width = 1.0 / HAAR_BINS as f64;
        for (b, density) in s.histogram.iter().enumerate() {
            let (lo, hi) = (b as f64 * width, (b + 1) as f64 * width);
            // Bin average of (d - 1)(1 - F)^{d - 2} is the CDF difference over the width.
            let cdf = |f: f64| 1.0 - (1.0 - f).powi(s.dim as i32 - 1);
            hist.push(HaarHistRow {
                dim: s.dim,
                bin_lo: lo,
                bin_hi: hi,
                density: *density,
                analytic: (cdf(hi) - cdf(lo)) / width,
            });
        }
    }
    Ok((rows, hist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::config::Experiment;

    #[test]
    fn seeds_are_spread() {
        let a = derive_seed(0, 0);
        assert_ne!(a, derive_seed(0, 1));
        assert_ne!(a, derive_seed(1, 0));
        assert_eq!(a, derive_seed(0, 0));
    }

    #[test]
    fn variance_estimator() {
        let (m, v) = mean_and_variance(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(mean_and_variance(&[2.0]).1, 0.0);
    }

    #[test]
    fn prepared_data_is_scaled_and_split() {
        let cfg = ExperimentConfig::defaults(Experiment::Train);
        let d = prepare_data(&cfg.dataset, 0, None).unwrap();
        assert_eq!(d.train.len() + d.test.len(), 501);
        assert_eq!(d.train.len(), 375);
        let in_range = |ds: &Dataset| ds.features.iter().flatten().all(|v| (0.0..=std::f64::consts::PI).contains(v));
        assert!(in_range(&d.train) && in_range(&d.test));
        let tet = ExperimentConfig::defaults(Experiment::TempSweep);
        let d = prepare_data(&tet.dataset, 0, None).unwrap();
        assert_eq!((d.train.len(), d.train.n_features(), d.train.n_classes), (300, 8, 5));
    }

    #[test]
    fn balanced_ratio_matches_the_plain_pipeline() {
        let cfg = ExperimentConfig::defaults(Experiment::ImbalanceSweep);
        let a = prepare_data(&cfg.dataset, 3, Some(1.0)).unwrap();
        let b = prepare_data(&cfg.dataset, 3, None).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
    }

    #[test]
    fn bp_observable_sets() {
        let s = bp_observables(ModelKind::PauliCE, 4, 3, 3).unwrap();
        assert_eq!(s.kind(), ObservableSetKind::PauliNonCommuting);
        let s = bp_observables(ModelKind::PauliCE, 4, 2, 3).unwrap();
        assert_eq!(s.kind(), ObservableSetKind::PauliCommuting);
        assert!(bp_observables(ModelKind::PauliCE, 4, 2, 5).is_err());
        let s = bp_observables(ModelKind::ProjF, 4, 3, 3).unwrap();
        assert_eq!(s.members()[2].to_string(), "P3:2");
    }
}
