//! Class centroids in state space and the intra/inter fidelity indicators.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevec::{inner_slices, StateVector, ZERO};

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 5000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentroidMode {
    /// Principal eigenvector of the class mean density matrix.
    #[default]
    Eigen,
    /// Normalized mean of the raw amplitude vectors.
    AmplitudeMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcIndicators {
    pub intra: f64,
    /// Zero (with `inter_defined == false`) when there is a single class.
    pub inter: f64,
    pub inter_defined: bool,
    pub centroids: Vec<StateVector>,
}

fn group_by_class<'a>(
    states: &'a [StateVector],
    labels: &[usize],
    n_classes: usize,
) -> Result<Vec<Vec<&'a StateVector>>> {
    if states.len() != labels.len() {
        return Err(Error::contract(format!(
            "{} states but {} labels",
            states.len(),
            labels.len()
        )));
    }
    let mut groups = vec![Vec::new(); n_classes];
    for (s, &l) in states.iter().zip(labels) {
        groups
            .get_mut(l)
            .ok_or_else(|| Error::contract(format!("label {l} out of range")))?
            .push(s);
    }
    if let Some(c) = groups.iter().position(Vec::is_empty) {
        return Err(Error::contract(format!("class {c} has no states")));
    }
    let n = groups[0][0].n_qubits();
    if states.iter().any(|s| s.n_qubits() != n) {
        return Err(Error::contract("states of different sizes"));
    }
    Ok(groups)
}

pub fn class_centroids(
    states: &[StateVector],
    labels: &[usize],
    n_classes: usize,
    mode: CentroidMode,
) -> Result<Vec<StateVector>> {
    group_by_class(states, labels, n_classes)?
        .iter()
        .map(|members| {
            let v = match mode {
                CentroidMode::Eigen => principal_eigenvector(members),
                CentroidMode::AmplitudeMean => amplitude_mean(members),
            };
            StateVector::from_amplitudes(fix_phase(v))
        })
        .collect()
}

pub fn nc_indicators(
    states: &[StateVector],
    labels: &[usize],
    n_classes: usize,
    mode: CentroidMode,
) -> Result<NcIndicators> {
    let centroids = class_centroids(states, labels, n_classes, mode)?;
    let intra = states
        .iter()
        .zip(labels)
        .map(|(s, &l)| fidelity(s.amplitudes(), centroids[l].amplitudes()))
        .sum::<f64>()
        / states.len() as f64;
    let (mut inter, mut pairs) = (0.0, 0usize);
    for a in 0..n_classes {
        for b in a + 1..n_classes {
            inter += fidelity(centroids[a].amplitudes(), centroids[b].amplitudes());
            pairs += 1;
        }
    }
    Ok(NcIndicators {
        intra,
        inter: if pairs > 0 { inter / pairs as f64 } else { 0.0 },
        inter_defined: pairs > 0,
        centroids,
    })
}

fn fidelity(a: &[Complex64], b: &[Complex64]) -> f64 {
    inner_slices(a, b).norm_sqr().clamp(0.0, 1.0)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn scale(v: &mut [Complex64], s: f64) {
    for a in v {
        *a *= s;
    }
}

/// Power iteration on `rho = (1/N) sum |psi><psi|`. With fewer states than
/// amplitudes it runs on the Gram matrix and maps the result back.
fn principal_eigenvector(members: &[&StateVector]) -> Vec<Complex64> {
    let n = members.len();
    let dim = members[0].dim();
    let inv_n = 1.0 / n as f64;
    if n < dim {
        let mut gram = vec![ZERO; n * n];
        for i in 0..n {
            for j in i..n {
                let g = inner_slices(members[i].amplitudes(), members[j].amplitudes()) * inv_n;
                gram[i * n + j] = g;
                gram[j * n + i] = g.conj();
            }
        }
        let apply = |a: &[Complex64], out: &mut [Complex64]| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = gram[i * n..(i + 1) * n].iter().zip(a).map(|(g, x)| g * x).sum();
            }
        };
        let mut e0 = vec![ZERO; n];
        e0[0] = Complex64::new(1.0, 0.0);
        let coeffs = power_iterate(n, apply, e0);
        let mut v = vec![ZERO; dim];
        for (c, s) in coeffs.iter().zip(members) {
            for (o, a) in v.iter_mut().zip(s.amplitudes()) {
                *o += c * a;
            }
        }
        let nv = norm(&v);
        scale(&mut v, 1.0 / nv);
        v
    } else {
        let mut rho = vec![ZERO; dim * dim];
        for s in members {
            let a = s.amplitudes();
            for i in 0..dim {
                let ai = a[i] * inv_n;
                for (r, aj) in rho[i * dim..(i + 1) * dim].iter_mut().zip(a) {
                    *r += ai * aj.conj();
                }
            }
        }
        let apply = |v: &[Complex64], out: &mut [Complex64]| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = rho[i * dim..(i + 1) * dim].iter().zip(v).map(|(r, x)| r * x).sum();
            }
        };
        power_iterate(dim, apply, members[0].amplitudes().to_vec())
    }
}

/// Starts from the uniform vector; if that is annihilated, restarts from
/// `fallback`. Stops when `|A v - (v^dag A v) v| < POWER_TOL`.
fn power_iterate<F>(dim: usize, apply: F, fallback: Vec<Complex64>) -> Vec<Complex64>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let mut v = vec![Complex64::new(1.0 / (dim as f64).sqrt(), 0.0); dim];
    let mut w = vec![ZERO; dim];
    apply(&v, &mut w);
    if norm(&w) < 1e-12 {
        v = fallback;
        let nv = norm(&v);
        scale(&mut v, 1.0 / nv);
        apply(&v, &mut w);
    }
    for _ in 0..POWER_MAX_ITERS {
        let lambda = inner_slices(&v, &w);
        let residual = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (b - lambda * a).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let nw = norm(&w);
        if nw == 0.0 {
            break;
        }
        std::mem::swap(&mut v, &mut w);
        scale(&mut v, 1.0 / nw);
        if residual < POWER_TOL {
            break;
        }
        apply(&v, &mut w);
    }
    v
}

fn amplitude_mean(members: &[&StateVector]) -> Vec<Complex64> {
    let mut v = vec![ZERO; members[0].dim()];
    for s in members {
        for (o, a) in v.iter_mut().zip(s.amplitudes()) {
            *o += a;
        }
    }
    let nv = norm(&v);
    if nv < 1e-12 {
        return members[0].amplitudes().to_vec();
    }
    scale(&mut v, 1.0 / nv);
    v
}

/// Rotates the global phase so the largest-magnitude amplitude (first on
/// ties) is real and non-negative.
fn fix_phase(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let mut best = 0;
    for (i, a) in v.iter().enumerate() {
        if a.norm_sqr() > v[best].norm_sqr() {
            best = i;
        }
    }
    let pivot = v[best];
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        for a in &mut v {
            *a *= phase;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(amps: &[(f64, f64)]) -> StateVector {
        StateVector::from_amplitudes(amps.iter().map(|&(r, i)| Complex64::new(r, i)).collect()).unwrap()
    }

    #[test]
    fn identical_states_are_their_own_centroid() {
        let s = state(&[(0.6, 0.0), (0.0, 0.8)]);
        for mode in [CentroidMode::Eigen, CentroidMode::AmplitudeMean] {
            let c = class_centroids(&[s.clone(), s.clone(), s.clone()], &[0, 0, 0], 1, mode).unwrap();
            assert!((c[0].fidelity(&s).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_pair_splits_evenly() {
        let a = StateVector::basis(1, 0).unwrap();
        let b = StateVector::basis(1, 1).unwrap();
        let c = class_centroids(&[a.clone(), b.clone()], &[0, 0], 1, CentroidMode::Eigen).unwrap();
        assert!((c[0].fidelity(&a).unwrap() - 0.5).abs() < 1e-12);
        assert!((c[0].fidelity(&b).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn global_phase_does_not_move_centroids() {
        let states = [
            state(&[(0.6, 0.0), (0.8, 0.0)]),
            state(&[(0.8, 0.0), (0.0, 0.6)]),
            state(&[(0.9, 0.0), (0.0, -0.4358898943540674)]),
        ];
        let phase = Complex64::from_polar(1.0, 0.9);
        let rotated: Vec<StateVector> = states
            .iter()
            .map(|s| StateVector::from_amplitudes(s.amplitudes().iter().map(|a| a * phase).collect()).unwrap())
            .collect();
        let c1 = class_centroids(&states, &[0, 0, 0], 1, CentroidMode::Eigen).unwrap();
        let c2 = class_centroids(&rotated, &[0, 0, 0], 1, CentroidMode::Eigen).unwrap();
        for (a, b) in c1[0].amplitudes().iter().zip(c2[0].amplitudes()) {
            assert!((a - b).norm() < 1e-9);
        }
        let pivot = c1[0].amplitudes().iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
        assert!(pivot.im.abs() < 1e-12 && pivot.re > 0.0);
    }

    #[test]
    fn eigen_centroid_beats_every_other_direction() {
        // The principal eigenvector maximizes the mean fidelity.
        let states = [
            state(&[(1.0, 0.0), (0.0, 0.0)]),
            state(&[(0.6, 0.0), (0.8, 0.0)]),
            state(&[(0.8, 0.0), (0.0, 0.6)]),
        ];
        let c = class_centroids(&states, &[0, 0, 0], 1, CentroidMode::Eigen).unwrap();
        let mean_f = |v: &StateVector| states.iter().map(|s| s.fidelity(v).unwrap()).sum::<f64>() / 3.0;
        let best = mean_f(&c[0]);
        for k in 0..200 {
            let t = k as f64 * 0.0157;
            for p in [0.0, 0.7, 1.9] {
                let v = state(&[(t.cos(), 0.0), (t.sin() * f64::cos(p), t.sin() * f64::sin(p))]);
                assert!(mean_f(&v) <= best + 1e-12);
            }
        }
    }

    #[test]
    fn gram_and_dense_paths_agree() {
        // Two states in dimension 2 take the dense path; three in dimension 4
        // take the Gram path. Compare against a dense reference built here.
        let s = [
            state(&[(0.5, 0.1), (0.5, 0.0), (0.5, -0.2), (0.0, 0.45825756949558394)]),
            state(&[(0.7, 0.0), (0.1, 0.1), (0.0, 0.7), (0.0, 0.0)]),
            state(&[(0.6, 0.0), (0.6, 0.0), (0.0, 0.0), (0.5291502622129182, 0.0)]),
        ];
        let s: Vec<StateVector> = s
            .into_iter()
            .map(|mut v| {
                v.normalize();
                v
            })
            .collect();
        let gram = class_centroids(&s, &[0, 0, 0], 1, CentroidMode::Eigen).unwrap();
        let mut padded = s.clone();
        padded.extend(s.iter().cloned());
        padded.extend(s.iter().cloned());
        // Six copies of three states is the same density matrix on the dense path.
        let dense = class_centroids(&padded[..], &[0; 9], 1, CentroidMode::Eigen).unwrap();
        for (a, b) in gram[0].amplitudes().iter().zip(dense[0].amplitudes()) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn indicator_endpoints() {
        let b: Vec<StateVector> = (0..4).map(|i| StateVector::basis(2, i).unwrap()).collect();
        let states = vec![b[0].clone(), b[0].clone(), b[1].clone(), b[1].clone(), b[2].clone()];
        let nc = nc_indicators(&states, &[0, 0, 1, 1, 2], 3, CentroidMode::Eigen).unwrap();
        assert!((nc.intra - 1.0).abs() < 1e-12 && nc.inter.abs() < 1e-12);
        let same = vec![b[3].clone(); 4];
        let nc = nc_indicators(&same, &[0, 1, 0, 1], 2, CentroidMode::Eigen).unwrap();
        assert!((nc.intra - 1.0).abs() < 1e-12 && (nc.inter - 1.0).abs() < 1e-12);
        let nc = nc_indicators(&same, &[0, 0, 0, 0], 1, CentroidMode::Eigen).unwrap();
        assert!(!nc.inter_defined && nc.inter == 0.0);
    }

    #[test]
    fn hand_computed_indicators() {
        // Class 0: |00>, |00>. Class 1: |+0>, |+0> (qubit 0 in |+>).
        let zero = StateVector::basis(2, 0).unwrap();
        let plus = crate::statevec::plus_state(2, 0).unwrap();
        let nc = nc_indicators(
            &[zero.clone(), zero, plus.clone(), plus],
            &[0, 0, 1, 1],
            2,
            CentroidMode::Eigen,
        )
        .unwrap();
        assert!((nc.intra - 1.0).abs() < 1e-12);
        assert!((nc.inter - 0.5).abs() < 1e-12);
    }

    #[test]
    fn contracts() {
        let s = StateVector::basis(1, 0).unwrap();
        assert!(class_centroids(&[s.clone()], &[0], 2, CentroidMode::Eigen).is_err());
        assert!(class_centroids(&[s.clone()], &[0, 1], 2, CentroidMode::Eigen).is_err());
        assert!(class_centroids(&[s], &[3], 2, CentroidMode::Eigen).is_err());
    }
}
