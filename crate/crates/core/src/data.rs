//! Synthetic datasets, resampling, feature scaling and CSV persistence.

use std::f64::consts::PI;
use std::fs::File;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::contract(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::contract(format!("label {l} out of range for {n_classes} classes")));
        }
        if let Some(first) = features.first() {
            if features.iter().any(|r| r.len() != first.len()) {
                return Err(Error::contract("ragged feature rows"));
            }
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Sample indices grouped by class, each list ascending.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlobsParams {
    pub n_features: usize,
    pub n_classes: usize,
    pub n_samples: usize,
    pub sigma: f64,
}

impl BlobsParams {
    pub const BLOBS2: BlobsParams = BlobsParams {
        n_features: 2,
        n_classes: 3,
        n_samples: 10_000,
        sigma: 0.15,
    };
    pub const BLOBS8: BlobsParams = BlobsParams {
        n_features: 8,
        n_classes: 5,
        n_samples: 10_000,
        sigma: 0.25,
    };
}

const MAX_CENTROID_DRAWS: usize = 100;

/// Gaussian blobs around `K` centroids drawn uniform in `[-1, 1]^m`, redrawn
/// until every pair is at least `4 sigma` apart. Labels are round-robin.
pub fn gen_blobs(params: &BlobsParams, seed: u64) -> Result<Dataset> {
    let BlobsParams {
        n_features: m,
        n_classes: k,
        n_samples: n,
        sigma,
    } = *params;
    if k < 2 || n < k || m == 0 {
        return Err(Error::contract(format!(
            "blobs need K >= 2, N >= K and m >= 1, got K={k} N={n} m={m}"
        )));
    }
    let noise = Normal::new(0.0, sigma)
        .map_err(|e| Error::contract(format!("invalid sigma {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_sep = 4.0 * sigma;
    let mut centroids = None;
    for _ in 0..MAX_CENTROID_DRAWS {
        let c: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        let separated = (0..k).all(|a| (a + 1..k).all(|b| distance(&c[a], &c[b]) >= min_sep));
        if separated {
            centroids = Some(c);
            break;
        }
    }
    let centroids = centroids.ok_or_else(|| {
        Error::Generation(format!(
            "no {k} centroids in [-1,1]^{m} with separation {min_sep} after {MAX_CENTROID_DRAWS} draws"
        ))
    })?;
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        features.push(centroids[c].iter().map(|v| v + noise.sample(&mut rng)).collect());
        labels.push(c);
    }
    Dataset::new(format!("blobs{m}"), features, labels, k)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub const TETROMINO_SIDE: usize = 4;
pub const TETROMINO_PRESET_SIZE: usize = 400;
pub const TETROMINO_NAMES: [&str; 5] = ["I", "O", "T", "S", "L"];

/// Cells `(row, col)` of each shape in its bounding box.
const TETROMINO_SHAPES: [&[(usize, usize)]; 5] = [
    &[(0, 0), (0, 1), (0, 2), (0, 3)],
    &[(0, 0), (0, 1), (1, 0), (1, 1)],
    &[(0, 0), (0, 1), (0, 2), (1, 1)],
    &[(0, 1), (0, 2), (1, 0), (1, 1)],
    &[(0, 0), (1, 0), (2, 0), (2, 1)],
];

/// Every translation of `shape` that fits inside the grid, as flat pixel
/// index lists.
pub fn tetromino_placements(shape: usize) -> Vec<Vec<usize>> {
    let cells = TETROMINO_SHAPES[shape];
    let h = cells.iter().map(|c| c.0).max().unwrap_or(0) + 1;
    let w = cells.iter().map(|c| c.1).max().unwrap_or(0) + 1;
    let mut out = Vec::new();
    for dr in 0..=TETROMINO_SIDE - h {
        for dc in 0..=TETROMINO_SIDE - w {
            out.push(
                cells
                    .iter()
                    .map(|(r, c)| (r + dr) * TETROMINO_SIDE + c + dc)
                    .collect(),
            );
        }
    }
    out
}

/// 4x4 grayscale tetrominoes: sample `i` has class `i mod 5`, a random valid
/// translation, foreground ~ U(0.7, 1.0) and background ~ U(0, 0.2).
pub fn gen_tetrominoes(n_samples: usize, seed: u64) -> Result<Dataset> {
    let placements: Vec<Vec<Vec<usize>>> = (0..5).map(tetromino_placements).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let class = i % 5;
        let cells = &placements[class][rng.random_range(0..placements[class].len())];
        let mut img = vec![false; TETROMINO_SIDE * TETROMINO_SIDE];
        for &p in cells {
            img[p] = true;
        }
        features.push(
            img.iter()
                .map(|&on| {
                    if on {
                        rng.random_range(0.7..=1.0)
                    } else {
                        rng.random_range(0.0..=0.2)
                    }
                })
                .collect(),
        );
        labels.push(class);
    }
    Dataset::new("tetrominoes", features, labels, 5)
}

/// Majority size `M` with `M + (K-1) round(ratio M)` closest to `total`.
pub fn imbalance_sizes(n_classes: usize, ratio: f64, total: usize) -> Result<Vec<usize>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::contract(format!("imbalance ratio must be in (0, 1], got {ratio}")));
    }
    if n_classes < 2 {
        return Err(Error::contract("imbalance needs at least two classes"));
    }
    let minority = |m: usize| (ratio * m as f64).round() as usize;
    let realized = |m: usize| m + (n_classes - 1) * minority(m);
    let mut best = 1;
    for m in 1..=total {
        if realized(m).abs_diff(total) < realized(best).abs_diff(total) {
            best = m;
        }
    }
    let mut sizes = vec![minority(best); n_classes];
    sizes[0] = best;
    Ok(sizes)
}

/// Draws `sizes[c]` samples of every class without replacement; output keeps
/// the original sample order.
pub fn sample_per_class(dataset: &Dataset, sizes: &[usize], seed: u64) -> Result<Dataset> {
    if sizes.len() != dataset.n_classes {
        return Err(Error::contract("one size per class required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    for (c, mut idx) in dataset.class_indices().into_iter().enumerate() {
        if sizes[c] > idx.len() {
            return Err(Error::Generation(format!(
                "class {c} needs {} samples, only {} available",
                sizes[c],
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        chosen.extend_from_slice(&idx[..sizes[c]]);
    }
    chosen.sort_unstable();
    Ok(dataset.subset(&chosen))
}

/// Keeps class 0 as the majority and undersamples the rest to
/// `round(ratio * M)` each, with the total close to `total`.
pub fn resample_imbalance(dataset: &Dataset, ratio: f64, total: usize, seed: u64) -> Result<Dataset> {
    let sizes = imbalance_sizes(dataset.n_classes, ratio, total)?;
    sample_per_class(dataset, &sizes, seed)
}

/// Balanced subsample of about `total` samples; the `ratio = 1` case of
/// [`resample_imbalance`].
pub fn stratified_subsample(dataset: &Dataset, total: usize, seed: u64) -> Result<Dataset> {
    resample_imbalance(dataset, 1.0, total, seed)
}

/// Keeps the listed classes and relabels them `0..classes.len()` in order.
pub fn filter_classes(dataset: &Dataset, classes: &[usize]) -> Result<Dataset> {
    if classes.len() < 2 {
        return Err(Error::contract("keep at least two classes"));
    }
    let mut relabel = vec![None; dataset.n_classes];
    for (new, &old) in classes.iter().enumerate() {
        if old >= dataset.n_classes || relabel[old].is_some() {
            return Err(Error::contract(format!("invalid class list {classes:?}")));
        }
        relabel[old] = Some(new);
    }
    let (mut features, mut labels) = (Vec::new(), Vec::new());
    for (row, &l) in dataset.features.iter().zip(&dataset.labels) {
        if let Some(new) = relabel[l] {
            features.push(row.clone());
            labels.push(new);
        }
    }
    Dataset::new(dataset.name.clone(), features, labels, classes.len())
}

/// Averages consecutive groups of `width` features.
pub fn pool_features(dataset: &Dataset, width: usize) -> Result<Dataset> {
    let m = dataset.n_features();
    if width == 0 || m % width != 0 {
        return Err(Error::contract(format!("cannot pool {m} features in groups of {width}")));
    }
    let features = dataset
        .features
        .iter()
        .map(|r| r.chunks(width).map(|c| c.iter().sum::<f64>() / width as f64).collect())
        .collect();
    Dataset::new(dataset.name.clone(), features, dataset.labels.clone(), dataset.n_classes)
}

/// Per-column min-max map onto `[0, pi]`, fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Scaler {
    pub fn fit(dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::contract("cannot fit a scaler on an empty dataset"));
        }
        let m = dataset.n_features();
        let mut min = vec![f64::INFINITY; m];
        let mut max = vec![f64::NEG_INFINITY; m];
        for row in &dataset.features {
            for (j, v) in row.iter().enumerate() {
                min[j] = min[j].min(*v);
                max[j] = max[j].max(*v);
            }
        }
        Ok(Self { min, max })
    }

    /// Constant columns map to `pi / 2`; values outside the fitted range clamp.
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| {
                let span = self.max[j] - self.min[j];
                if span > 0.0 {
                    (PI * (v - self.min[j]) / span).clamp(0.0, PI)
                } else {
                    PI / 2.0
                }
            })
            .collect()
    }

    pub fn transform(&self, dataset: &Dataset) -> Result<Dataset> {
        if dataset.n_features() != self.min.len() && !dataset.is_empty() {
            return Err(Error::contract(format!(
                "scaler fitted on {} features, dataset has {}",
                self.min.len(),
                dataset.n_features()
            )));
        }
        let features = dataset.features.iter().map(|r| self.transform_row(r)).collect();
        Dataset::new(dataset.name.clone(), features, dataset.labels.clone(), dataset.n_classes)
    }
}

pub fn scale_features(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, Scaler)> {
    let scaler = Scaler::fit(train)?;
    Ok((scaler.transform(train)?, scaler.transform(test)?, scaler))
}

/// Sidecar written next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub n_classes: usize,
    pub seed: u64,
    pub params: serde_json::Value,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `f0..f{m-1},label` rows and the JSON sidecar.
pub fn write_dataset(dataset: &Dataset, path: &Path, meta: &DatasetMeta) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..dataset.n_features()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (row, label) in dataset.features.iter().zip(&dataset.labels) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(label.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    serde_json::to_writer_pretty(File::create(sidecar_path(path))?, meta)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<(Dataset, DatasetMeta)> {
    let meta: DatasetMeta = serde_json::from_reader(File::open(sidecar_path(path))?)?;
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let m = header.len().saturating_sub(1);
    let well_formed = header.iter().last() == Some("label")
        && header.iter().take(m).enumerate().all(|(j, h)| h == format!("f{j}"));
    if !well_formed {
        return Err(Error::contract(format!(
            "{} does not have the f0..f{{m-1}},label header",
            path.display()
        )));
    }
    let (mut features, mut labels) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let parse_err = |v: &str| Error::contract(format!("bad value {v:?} in {}", path.display()));
        let row = rec
            .iter()
            .take(m)
            .map(|v| v.parse::<f64>().map_err(|_| parse_err(v)))
            .collect::<Result<Vec<_>>>()?;
        let label = &rec[m];
        features.push(row);
        labels.push(label.parse::<usize>().map_err(|_| parse_err(label))?);
    }
    Ok((Dataset::new(meta.name.clone(), features, labels, meta.n_classes)?, meta))
}
