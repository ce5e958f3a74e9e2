use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::statevec::{inner_slices, StateVector};

/// Largest pairwise overlap `mu = max |<v_i, v_j>|` of a frame and the Welch
/// lower bound `sqrt((k - D) / (D (k - 1)))` (zero when `k <= D`).
pub fn coherence_and_welch(vectors: &[Vec<Complex64>]) -> Result<(f64, f64)> {
    let k = vectors.len();
    if k < 2 {
        return Err(Error::contract("a frame needs at least two vectors"));
    }
    let dim = vectors[0].len();
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::contract(format!("vector {i} has dimension {}, expected {dim}", v.len())));
        }
        let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::contract(format!("vector {i} has norm {norm}")));
        }
    }
    let mut mu = 0.0f64;
    for i in 0..k {
        for j in i + 1..k {
            mu = mu.max(inner_slices(&vectors[i], &vectors[j]).norm());
        }
    }
    let welch = if k > dim {
        let (k, d) = (k as f64, dim as f64);
        ((k - d) / (d * (k - 1.0))).sqrt()
    } else {
        0.0
    };
    Ok((mu, welch))
}

/// Haar-random pure state of dimension `dim` (normalized complex Gaussian).
pub fn haar_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<StateVector> {
    let amps = (0..dim)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let mut s = StateVector::from_amplitudes(amps)?;
    s.normalize();
    Ok(s)
}

/// Density of the fidelity between two Haar-random states,
/// `P(F) = (d - 1)(1 - F)^{d - 2}`.
pub fn haar_fidelity_density(dim: usize, fidelity: f64) -> f64 {
    let d = dim as f64;
    (d - 1.0) * (1.0 - fidelity).powi(dim as i32 - 2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HaarStats {
    pub dim: usize,
    pub samples: usize,
    pub mean: f64,
    /// Standard error of `mean`.
    pub std_err: f64,
    /// Normalized density over equal-width bins on [0, 1].
    pub histogram: Vec<f64>,
}

pub const HAAR_BINS: usize = 20;

pub fn haar_fidelity_stats(dim: usize, samples: usize, seed: u64) -> Result<HaarStats> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::contract(format!(
            "Haar dimension must be a power of two >= 2, got {dim}"
        )));
    }
    if samples == 0 {
        return Err(Error::contract("need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; HAAR_BINS];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let a = haar_state(dim, &mut rng)?;
        let b = haar_state(dim, &mut rng)?;
        let f = a.fidelity(&b)?;
        sum += f;
        sum_sq += f * f;
        let bin = ((f * HAAR_BINS as f64) as usize).min(HAAR_BINS - 1);
        counts[bin] += 1;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let width = 1.0 / HAAR_BINS as f64;
    Ok(HaarStats {
        dim,
        samples,
        mean,
        std_err: (var / n).sqrt(),
        histogram: counts.iter().map(|&c| c as f64 / (n * width)).collect(),
    })
}
