use super::{pauli_decompose_projector, Observable};
use crate::error::{Error, Result};

/// Purity of an operator restricted to each fixed-locality module of the
/// Pauli basis, together with the module dimensions `3^k * C(n, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalityProfile {
    pub n_qubits: usize,
    pub per_locality_purity: Vec<f64>,
    pub per_locality_dim: Vec<u64>,
}

impl LocalityProfile {
    /// `sum_k purity_k`, which equals `Tr[O^2]`.
    pub fn total_purity(&self) -> f64 {
        self.per_locality_purity.iter().sum()
    }
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

fn module_dims(n_qubits: usize) -> Vec<u64> {
    (0..=n_qubits)
        .map(|k| 3u64.pow(k as u32) * binomial(n_qubits, k))
        .collect()
}

/// Purity per locality in the orthonormal basis `P / sqrt(2^n)`:
/// `purity_k = sum_{|P| = k} |Tr[P O]|^2 / 2^n`.
pub fn locality_profile(observable: &Observable, n_qubits: usize) -> Result<LocalityProfile> {
    observable.check_qubits(n_qubits)?;
    let two_n = 2f64.powi(n_qubits as i32);
    let mut purity = vec![0.0; n_qubits + 1];
    match observable {
        // Tr[P P] = 2^n, so the single term contributes 2^{2n} / 2^n.
        Observable::Pauli(p) => purity[p.locality()] = two_n,
        Observable::Projector(proj) => {
            for (p, c) in pauli_decompose_projector(proj, n_qubits)? {
                let trace = c * two_n;
                purity[p.locality()] += trace * trace / two_n;
            }
        }
    }
    Ok(LocalityProfile {
        n_qubits,
        per_locality_purity: purity,
        per_locality_dim: module_dims(n_qubits),
    })
}

/// Module-wise variance predictor `sum_k P_k(rho) P_k(O) / dim_k`.
///
/// Only meaningful when the circuit behaves like a 2-design on each module;
/// the lab compares it qualitatively with sampled variances.
pub fn theoretical_variance_proxy(
    state_profile: &LocalityProfile,
    obs_profile: &LocalityProfile,
) -> Result<f64> {
    if state_profile.n_qubits != obs_profile.n_qubits {
        return Err(Error::contract(format!(
            "profiles on {} and {} qubits",
            state_profile.n_qubits, obs_profile.n_qubits
        )));
    }
    Ok(state_profile
        .per_locality_purity
        .iter()
        .zip(&obs_profile.per_locality_purity)
        .zip(&state_profile.per_locality_dim)
        .filter(|(_, &dim)| dim > 0)
        .map(|((s, o), &dim)| s * o / dim as f64)
        .sum())
}
