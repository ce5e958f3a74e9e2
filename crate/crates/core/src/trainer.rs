//! Adam training of circuit parameters with per-epoch metrics.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::circuit::ParamVector;
use crate::classifier::{macro_f1, predict, Model};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::lab::neural_collapse::{nc_indicators, CentroidMode};
use crate::statevec::StateVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    Full,
    Size(usize),
}

impl Serialize for BatchSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BatchSize::Full => s.serialize_str("full"),
            BatchSize::Size(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for BatchSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Size(usize),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Size(n) => Ok(BatchSize::Size(n)),
            Raw::Name(s) if s == "full" => Ok(BatchSize::Full),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "batch_size must be \"full\" or an integer, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: BatchSize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub centroid: CentroidMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.05,
            batch_size: BatchSize::Full,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            centroid: CentroidMode::Eigen,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, train_size: usize) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::contract("epochs must be at least 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::contract(format!("invalid learning rate {}", self.learning_rate)));
        }
        if let BatchSize::Size(b) = self.batch_size {
            if b == 0 || b > train_size {
                return Err(Error::contract(format!(
                    "batch size {b} not in 1..={train_size}"
                )));
            }
        }
        Ok(())
    }
}

/// Adam moments and step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }
}

pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, config: &TrainConfig) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::contract("parameter, gradient and moment shapes differ"));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "gradient",
            epoch: state.t as usize,
        });
    }
    state.t += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for i in 0..params.len() {
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.adam_eps);
    }
    Ok(())
}

/// Shuffled split into `floor(N ratio)` training samples and the rest.
pub fn split(dataset: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::contract(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let n_train = (dataset.len() as f64 * ratio).floor() as usize;
    if n_train == 0 || n_train == dataset.len() {
        return Err(Error::contract(format!(
            "splitting {} samples at {ratio} leaves one side empty",
            dataset.len()
        )));
    }
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((dataset.subset(&idx[..n_train]), dataset.subset(&idx[n_train..])))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_f1: f64,
    pub test_f1: f64,
    pub intra: f64,
    pub inter: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingTrace {
    pub rows: Vec<EpochRecord>,
}

pub const TRACE_HEADER: [&str; 7] = ["epoch", "train_loss", "test_loss", "train_f1", "test_f1", "intra", "inter"];

impl TrainingTrace {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.rows.last()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        w.write_record(TRACE_HEADER)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Loss, predictions and states of a model on a dataset.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub f1: f64,
    pub predictions: Vec<usize>,
    pub states: Vec<StateVector>,
}

pub fn evaluate(model: &Model, theta: &ParamVector, data: &Dataset) -> Result<Evaluation> {
    let per_sample = data
        .features
        .par_iter()
        .zip(data.labels.par_iter())
        .map(|(x, &y)| {
            let state = model.circuit().evolve(x, theta)?;
            let outputs = model
                .observables()
                .members()
                .iter()
                .map(|o| o.expectation(&state))
                .collect::<Result<Vec<_>>>()?;
            let loss = model.loss_config().value(&outputs, y)?;
            Ok((loss, predict(&outputs), state))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut loss = 0.0;
    let mut predictions = Vec::with_capacity(per_sample.len());
    let mut states = Vec::with_capacity(per_sample.len());
    for (l, p, s) in per_sample {
        loss += l;
        predictions.push(p);
        states.push(s);
    }
    Ok(Evaluation {
        loss: loss / data.len().max(1) as f64,
        f1: macro_f1(&data.labels, &predictions, model.n_classes())?,
        predictions,
        states,
    })
}

/// Mean loss and gradient over `batch`, reduced in index order.
pub fn batch_loss_and_grad(
    model: &Model,
    theta: &ParamVector,
    data: &Dataset,
    batch: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let per_sample = batch
        .par_iter()
        .map(|&i| model.loss_and_grad(&data.features[i], data.labels[i], theta))
        .collect::<Result<Vec<_>>>()?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for (l, g) in per_sample {
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok((loss * inv, grad))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub initial: ParamVector,
    pub theta: ParamVector,
    pub trace: TrainingTrace,
}

fn check_data(model: &Model, data: &Dataset) -> Result<()> {
    if data.n_classes != model.n_classes() {
        return Err(Error::contract(format!(
            "dataset has {} classes, model scores {}",
            data.n_classes,
            model.n_classes()
        )));
    }
    if data.n_features() != model.spec().n_features {
        return Err(Error::contract(format!(
            "dataset has {} features, circuit expects {}",
            data.n_features(),
            model.spec().n_features
        )));
    }
    Ok(())
}

/// Initializes uniformly from `config.seed`, then runs `config.epochs`
/// passes of Adam. Each trace row is measured after that epoch's updates;
/// the neural-collapse indicators use the training set.
pub fn train(model: &Model, train_set: &Dataset, test_set: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    check_data(model, train_set)?;
    check_data(model, test_set)?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::contract("training and test sets must be non-empty"));
    }
    config.validate(train_set.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let initial = ParamVector::uniform(model.spec(), &mut rng);
    let mut theta = initial.clone();
    let mut adam = AdamState::new(theta.len());
    let batch = match config.batch_size {
        BatchSize::Full => train_set.len(),
        BatchSize::Size(b) => b,
    };
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut trace = TrainingTrace::default();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let (loss, grad) = batch_loss_and_grad(model, &theta, train_set, chunk)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite { what: "loss", epoch });
            }
            adam_step(theta.as_mut_slice(), &grad, &mut adam, config)
                .map_err(|e| match e {
                    Error::NonFinite { what, .. } => Error::NonFinite { what, epoch },
                    e => e,
                })?;
        }
        let tr = evaluate(model, &theta, train_set)?;
        let te = evaluate(model, &theta, test_set)?;
        if !tr.loss.is_finite() || !te.loss.is_finite() {
            return Err(Error::NonFinite { what: "loss", epoch });
        }
        let nc = nc_indicators(&tr.states, &train_set.labels, model.n_classes(), config.centroid)?;
        trace.rows.push(EpochRecord {
            epoch,
            train_loss: tr.loss,
            test_loss: te.loss,
            train_f1: tr.f1,
            test_f1: te.f1,
            intra: nc.intra,
            inter: nc.inter,
        });
    }
    Ok(TrainOutcome { initial, theta, trace })
}
