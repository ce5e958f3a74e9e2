//! Data re-uploading ansatz.
//!
//! Each of the `n_layers` blocks applies, in order:
//! 1. `RX(x[j mod n_features])` on every qubit `j` (angle encoding),
//! 2. `Rot(phi, theta, omega) = RZ(omega) RY(theta) RZ(phi)` on every qubit,
//! 3. a CNOT ring where qubit `q` controls `(q + 1) mod n_qubits` (skipped for
//!    a single qubit).
//!
//! The evaluator fuses steps 1-2 into one 2x2 kernel per qubit and the ring
//! into one index permutation. Gradients use adjoint differentiation: one
//! backward sweep per cotangent state, with the three rotation derivatives of
//! each fused block recovered from a 2x2 transition matrix.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::Observable;
use crate::statevec::{
    mat2_adjoint, mat2_mul, rx_matrix, ry_matrix, rz_matrix, Gate, Mat2, StateVector, DEFAULT_QUBIT_CAP,
    ZERO,
};

/// Tolerance on the `[0, pi]` feature range.
const SCALE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub n_layers: usize,
    /// Features are tiled cyclically over qubits; extra features beyond
    /// `n_qubits` never reach the circuit.
    pub n_features: usize,
}

impl CircuitSpec {
    pub fn new(n_qubits: usize, n_layers: usize, n_features: usize) -> Result<Self> {
        if n_qubits == 0 || n_layers == 0 || n_features == 0 {
            return Err(Error::contract(format!(
                "circuit needs positive sizes, got qubits={n_qubits} layers={n_layers} features={n_features}"
            )));
        }
        if n_qubits > DEFAULT_QUBIT_CAP {
            return Err(Error::Resource {
                requested_qubits: n_qubits,
                dim: 1u128 << n_qubits.min(127),
                cap: DEFAULT_QUBIT_CAP,
            });
        }
        Ok(Self {
            n_qubits,
            n_layers,
            n_features,
        })
    }

    pub fn n_params(&self) -> usize {
        3 * self.n_qubits * self.n_layers
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }
}

/// Rotation angles laid out as `[layer][qubit][phi, theta, omega]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(spec: &CircuitSpec) -> Self {
        Self(vec![0.0; spec.n_params()])
    }

    pub fn from_vec(spec: &CircuitSpec, angles: Vec<f64>) -> Result<Self> {
        if angles.len() != spec.n_params() {
            return Err(Error::contract(format!(
                "expected {} angles, got {}",
                spec.n_params(),
                angles.len()
            )));
        }
        Ok(Self(angles))
    }

    /// Every angle uniform on `[0, 2 pi)`.
    pub fn uniform<R: Rng + ?Sized>(spec: &CircuitSpec, rng: &mut R) -> Self {
        Self(
            (0..spec.n_params())
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect(),
        )
    }

    pub fn index(spec: &CircuitSpec, layer: usize, qubit: usize, k: usize) -> usize {
        (layer * spec.n_qubits + qubit) * 3 + k
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// `RZ(omega) RY(theta) RZ(phi) RX(x)`, with the parts kept for the backward
/// sweep.
struct Block {
    rx: Mat2,
    rz_phi: Mat2,
    ry_theta: Mat2,
    rz_omega: Mat2,
}

impl Block {
    fn new(x: f64, angles: &[f64]) -> Self {
        Self {
            rx: rx_matrix(x),
            rz_phi: rz_matrix(angles[0]),
            ry_theta: ry_matrix(angles[1]),
            rz_omega: rz_matrix(angles[2]),
        }
    }

    fn matrix(&self) -> Mat2 {
        let m = mat2_mul(&self.rz_phi, &self.rx);
        let m = mat2_mul(&self.ry_theta, &m);
        mat2_mul(&self.rz_omega, &m)
    }
}

/// Precomputed evaluator for one [`CircuitSpec`].
#[derive(Debug, Clone)]
pub struct Circuit {
    spec: CircuitSpec,
    /// `forward[j]`: source index of amplitude `j` after the CNOT ring.
    ring_forward: Vec<u32>,
    ring_inverse: Vec<u32>,
}

impl Circuit {
    pub fn new(spec: CircuitSpec) -> Result<Self> {
        let spec = CircuitSpec::new(spec.n_qubits, spec.n_layers, spec.n_features)?;
        let n = spec.n_qubits;
        let (mut ring_forward, mut ring_inverse) = (Vec::new(), Vec::new());
        if n > 1 {
            let dim = spec.dim();
            ring_forward = vec![0u32; dim];
            ring_inverse = vec![0u32; dim];
            for i in 0..dim {
                let mut bits = i;
                for q in 0..n {
                    let t = (q + 1) % n;
                    if bits >> q & 1 == 1 {
                        bits ^= 1 << t;
                    }
                }
                ring_forward[bits] = i as u32;
                ring_inverse[i] = bits as u32;
            }
        }
        Ok(Self {
            spec,
            ring_forward,
            ring_inverse,
        })
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    fn check_inputs(&self, x: &[f64], theta: &ParamVector) -> Result<()> {
        if x.len() != self.spec.n_features {
            return Err(Error::contract(format!(
                "expected {} features, got {}",
                self.spec.n_features,
                x.len()
            )));
        }
        if let Some((j, v)) = x
            .iter()
            .enumerate()
            .find(|(_, v)| !(-SCALE_TOL..=std::f64::consts::PI + SCALE_TOL).contains(*v))
        {
            return Err(Error::contract(format!(
                "feature {j} = {v} outside the encoding range [0, pi]"
            )));
        }
        if theta.len() != self.spec.n_params() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                self.spec.n_params(),
                theta.len()
            )));
        }
        Ok(())
    }

    fn check_observables(&self, observables: &[Observable]) -> Result<()> {
        observables
            .iter()
            .try_for_each(|o| o.check_qubits(self.spec.n_qubits))
    }

    fn block(&self, x: &[f64], theta: &ParamVector, layer: usize, qubit: usize) -> Block {
        let start = ParamVector::index(&self.spec, layer, qubit, 0);
        Block::new(
            x[qubit % self.spec.n_features],
            &theta.as_slice()[start..start + 3],
        )
    }

    /// The literal gate sequence of the ansatz.
    pub fn gate_list(&self, x: &[f64], theta: &ParamVector) -> Result<Vec<Gate>> {
        self.check_inputs(x, theta)?;
        let (n, s) = (self.spec.n_qubits, &self.spec);
        let mut gates = Vec::new();
        for l in 0..s.n_layers {
            for q in 0..n {
                gates.push(Gate::Rx { target: q, angle: x[q % s.n_features] });
            }
            for q in 0..n {
                let a = &theta.as_slice()[ParamVector::index(s, l, q, 0)..];
                gates.push(Gate::Rz { target: q, angle: a[0] });
                gates.push(Gate::Ry { target: q, angle: a[1] });
                gates.push(Gate::Rz { target: q, angle: a[2] });
            }
            if n > 1 {
                for q in 0..n {
                    gates.push(Gate::Cnot { control: q, target: (q + 1) % n });
                }
            }
        }
        Ok(gates)
    }

    /// Final state `U(x, theta)|0...0>`.
    pub fn evolve(&self, x: &[f64], theta: &ParamVector) -> Result<StateVector> {
        self.check_inputs(x, theta)?;
        let mut state = StateVector::zero(self.spec.n_qubits)?;
        let mut scratch = Vec::with_capacity(state.dim());
        for l in 0..self.spec.n_layers {
            for q in 0..self.spec.n_qubits {
                state.apply_single_qubit(q, &self.block(x, theta, l, q).matrix());
            }
            if self.spec.n_qubits > 1 {
                state.gather(&self.ring_forward, &mut scratch);
            }
        }
        Ok(state)
    }

    pub fn expectations(
        &self,
        x: &[f64],
        theta: &ParamVector,
        observables: &[Observable],
    ) -> Result<Vec<f64>> {
        self.check_observables(observables)?;
        let state = self.evolve(x, theta)?;
        observables.iter().map(|o| o.expectation(&state)).collect()
    }

    /// `d<O_k>/d theta_mu` for every observable (rows) and parameter (columns).
    pub fn jacobian(
        &self,
        x: &[f64],
        theta: &ParamVector,
        observables: &[Observable],
    ) -> Result<Vec<Vec<f64>>> {
        self.check_observables(observables)?;
        let state = self.evolve(x, theta)?;
        let lambdas = observables
            .iter()
            .map(|o| apply_weighted(&state, &[(*o, 1.0)]))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.backward(x, theta, state, lambdas))
    }

    /// Vector-Jacobian product `sum_k w_k d<O_k>/d theta` for a state already
    /// produced by [`Circuit::evolve`] with the same inputs.
    pub fn vjp(
        &self,
        state: &StateVector,
        x: &[f64],
        theta: &ParamVector,
        observables: &[Observable],
        weights: &[f64],
    ) -> Result<Vec<f64>> {
        self.check_inputs(x, theta)?;
        self.check_observables(observables)?;
        if weights.len() != observables.len() {
            return Err(Error::contract(format!(
                "{} weights for {} observables",
                weights.len(),
                observables.len()
            )));
        }
        let terms: Vec<(Observable, f64)> = observables
            .iter()
            .copied()
            .zip(weights.iter().copied())
            .collect();
        let lambda = apply_weighted(state, &terms)?;
        Ok(self.backward(x, theta, state.clone(), vec![lambda]).remove(0))
    }

    /// Adjoint sweep from the output back to `|0...0>`. `phi` is the final
    /// state; each entry of `lambdas` is `M|phi>` for some Hermitian `M`, and
    /// the matching output row is `d<phi|M|phi>/d theta`.
    fn backward(
        &self,
        x: &[f64],
        theta: &ParamVector,
        mut phi: StateVector,
        mut lambdas: Vec<StateVector>,
    ) -> Vec<Vec<f64>> {
        let s = &self.spec;
        let mut grads = vec![vec![0.0; s.n_params()]; lambdas.len()];
        let mut scratch = Vec::with_capacity(phi.dim());
        for l in (0..s.n_layers).rev() {
            if s.n_qubits > 1 {
                phi.gather(&self.ring_inverse, &mut scratch);
                for lam in &mut lambdas {
                    lam.gather(&self.ring_inverse, &mut scratch);
                }
            }
            for q in (0..s.n_qubits).rev() {
                let block = self.block(x, theta, l, q);
                let base = ParamVector::index(s, l, q, 0);
                for (lam, g) in lambdas.iter().zip(grads.iter_mut()) {
                    let t3 = transition(&phi, lam, q);
                    let t2 = conjugate_by(&t3, &block.rz_omega);
                    let t1 = conjugate_by(&t2, &block.ry_theta);
                    g[base] = trace_z(&t1).im;
                    g[base + 1] = trace_y(&t2).im;
                    g[base + 2] = trace_z(&t3).im;
                }
                let undo = mat2_adjoint(&block.matrix());
                phi.apply_single_qubit(q, &undo);
                for lam in &mut lambdas {
                    lam.apply_single_qubit(q, &undo);
                }
            }
        }
        grads
    }
}

/// `sum_k w_k O_k |state>`.
fn apply_weighted(state: &StateVector, terms: &[(Observable, f64)]) -> Result<StateVector> {
    let mut out = vec![ZERO; state.dim()];
    for (o, w) in terms {
        o.check_qubits(state.n_qubits())?;
        o.accumulate(state.amplitudes(), *w, &mut out);
    }
    StateVector::from_amplitudes(out)
}

/// Reduced transition matrix on `qubit`: `T[b][a] = sum_rest phi[rest, b] conj(lam[rest, a])`,
/// so that `<lam|O_q|phi> = Tr[O T]`.
fn transition(phi: &StateVector, lam: &StateVector, qubit: usize) -> Mat2 {
    let stride = 1usize << qubit;
    let mut t = [[ZERO; 2]; 2];
    let (p, l) = (phi.amplitudes(), lam.amplitudes());
    for (pb, lb) in p.chunks_exact(stride << 1).zip(l.chunks_exact(stride << 1)) {
        let (p0, p1) = pb.split_at(stride);
        let (l0, l1) = lb.split_at(stride);
        for i in 0..stride {
            let (a0, a1) = (l0[i].conj(), l1[i].conj());
            t[0][0] += p0[i] * a0;
            t[0][1] += p0[i] * a1;
            t[1][0] += p1[i] * a0;
            t[1][1] += p1[i] * a1;
        }
    }
    t
}

/// `A^dagger T A`: the transition matrix seen one gate earlier.
fn conjugate_by(t: &Mat2, a: &Mat2) -> Mat2 {
    mat2_mul(&mat2_adjoint(a), &mat2_mul(t, a))
}

fn trace_z(t: &Mat2) -> Complex64 {
    t[0][0] - t[1][1]
}

fn trace_y(t: &Mat2) -> Complex64 {
    // Y = [[0, -i], [i, 0]]; Tr[Y T] = -i T[1][0] + i T[0][1].
    let i = Complex64::new(0.0, 1.0);
    i * (t[0][1] - t[1][0])
}

pub fn encode_and_evolve(spec: &CircuitSpec, x: &[f64], theta: &ParamVector) -> Result<StateVector> {
    Circuit::new(*spec)?.evolve(x, theta)
}

pub fn expectation_vector(
    spec: &CircuitSpec,
    x: &[f64],
    theta: &ParamVector,
    observables: &[Observable],
) -> Result<Vec<f64>> {
    Circuit::new(*spec)?.expectations(x, theta, observables)
}

pub fn gradient_expectations(
    spec: &CircuitSpec,
    x: &[f64],
    theta: &ParamVector,
    observables: &[Observable],
) -> Result<Vec<Vec<f64>>> {
    Circuit::new(*spec)?.jacobian(x, theta, observables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{PauliString, ProjectorObservable};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_x<R: Rng>(rng: &mut R, f: usize) -> Vec<f64> {
        (0..f).map(|_| rng.random_range(0.0..PI)).collect()
    }

    fn z(s: &str) -> Observable {
        s.parse::<PauliString>().unwrap().into()
    }

    #[test]
    fn parameter_count_law() {
        for n in 1..=6 {
            for l in 1..=6 {
                let spec = CircuitSpec::new(n, l, 1).unwrap();
                assert_eq!(ParamVector::zeros(&spec).len(), 3 * n * l);
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                assert_eq!(ParamVector::uniform(&spec, &mut rng).len(), 3 * n * l);
            }
        }
        assert!(CircuitSpec::new(0, 1, 1).is_err());
        assert!(CircuitSpec::new(25, 1, 1).is_err());
    }

    #[test]
    fn zero_inputs_stay_at_zero() {
        for n in 1..=4 {
            let spec = CircuitSpec::new(n, 3, n).unwrap();
            let s = encode_and_evolve(&spec, &vec![0.0; n], &ParamVector::zeros(&spec)).unwrap();
            let mut want = vec![ZERO; 1 << n];
            want[0] = crate::statevec::ONE;
            // RZ(0) is exactly the identity, so the output is exact.
            assert_eq!(s.amplitudes(), want.as_slice());
        }
    }

    #[test]
    fn fused_path_matches_gate_list() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (n, l, f) in [(1, 2, 1), (2, 1, 2), (3, 2, 2), (4, 3, 2), (5, 2, 5)] {
            let circ = Circuit::new(CircuitSpec::new(n, l, f).unwrap()).unwrap();
            let theta = ParamVector::uniform(circ.spec(), &mut rng);
            let x = random_x(&mut rng, f);
            let fast = circ.evolve(&x, &theta).unwrap();
            let mut slow = StateVector::zero(n).unwrap();
            for g in circ.gate_list(&x, &theta).unwrap() {
                slow.apply(&g).unwrap();
            }
            for (a, b) in fast.amplitudes().iter().zip(slow.amplitudes()) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn features_tile_cyclically() {
        let circ = Circuit::new(CircuitSpec::new(4, 1, 2).unwrap()).unwrap();
        let x = [0.4, 2.1];
        let gates = circ.gate_list(&x, &ParamVector::zeros(circ.spec())).unwrap();
        let angles: Vec<f64> = gates[..4]
            .iter()
            .map(|g| match g {
                Gate::Rx { angle, .. } => *angle,
                _ => panic!("encoding must come first"),
            })
            .collect();
        assert_eq!(angles, vec![0.4, 2.1, 0.4, 2.1]);
    }

    #[test]
    fn unitarity_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.random_range(1..=4);
            let spec = CircuitSpec::new(n, rng.random_range(1..=3), n).unwrap();
            let circ = Circuit::new(spec).unwrap();
            let theta = ParamVector::uniform(&spec, &mut rng);
            let x = random_x(&mut rng, n);
            let s = circ.evolve(&x, &theta).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            assert_eq!(s, circ.evolve(&x, &theta).unwrap());
        }
    }

    #[test]
    fn input_contracts() {
        let circ = Circuit::new(CircuitSpec::new(2, 1, 2).unwrap()).unwrap();
        let theta = ParamVector::zeros(circ.spec());
        assert!(circ.evolve(&[0.1], &theta).is_err());
        assert!(circ.evolve(&[0.1, 3.5], &theta).is_err());
        assert!(circ.evolve(&[-0.01, 0.0], &theta).is_err());
        assert!(circ.evolve(&[PI + 1e-12, 0.0], &theta).is_ok());
        let short = ParamVector::from_vec(&CircuitSpec::new(1, 1, 1).unwrap(), vec![0.0; 3]).unwrap();
        assert!(circ.evolve(&[0.1, 0.2], &short).is_err());
        assert!(ParamVector::from_vec(circ.spec(), vec![0.0; 5]).is_err());
        assert!(circ.expectations(&[0.1, 0.2], &theta, &[z("ZZZ")]).is_err());
    }

    #[test]
    fn expectations_at_the_origin() {
        let spec = CircuitSpec::new(3, 2, 3).unwrap();
        let theta = ParamVector::zeros(&spec);
        let obs = [z("ZII"), z("IZI"), z("IIZ")];
        assert_eq!(expectation_vector(&spec, &[0.0; 3], &theta, &obs).unwrap(), vec![1.0; 3]);
        let projs: Vec<Observable> = (0..4)
            .map(|i| ProjectorObservable::new(2, i).unwrap().into())
            .collect();
        assert_eq!(
            expectation_vector(&spec, &[0.0; 3], &theta, &projs).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0]
        );
    }

    fn finite_difference(
        circ: &Circuit,
        x: &[f64],
        theta: &ParamVector,
        obs: &[Observable],
    ) -> Vec<Vec<f64>> {
        let h = 1e-5;
        let mut out = vec![vec![0.0; theta.len()]; obs.len()];
        for mu in 0..theta.len() {
            let mut plus = theta.clone();
            plus.as_mut_slice()[mu] += h;
            let mut minus = theta.clone();
            minus.as_mut_slice()[mu] -= h;
            let ep = circ.expectations(x, &plus, obs).unwrap();
            let em = circ.expectations(x, &minus, obs).unwrap();
            for k in 0..obs.len() {
                out[k][mu] = (ep[k] - em[k]) / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (n, l) in [(1, 1), (1, 3), (2, 1), (2, 2), (3, 2), (4, 2)] {
            let circ = Circuit::new(CircuitSpec::new(n, l, n.min(2)).unwrap()).unwrap();
            let theta = ParamVector::uniform(circ.spec(), &mut rng);
            let x = random_x(&mut rng, n.min(2));
            let mut obs: Vec<Observable> = Vec::new();
            let letters = ["X", "Y", "Z"];
            for k in 0..3 {
                let s: String = (0..n).map(|q| if q == k % n { letters[k] } else { "I" }).collect();
                obs.push(z(&s));
            }
            obs.push(ProjectorObservable::new(n.min(2), 1 % (1 << n.min(2))).unwrap().into());
            let analytic = circ.jacobian(&x, &theta, &obs).unwrap();
            let numeric = finite_difference(&circ, &x, &theta, &obs);
            for (ra, rn) in analytic.iter().zip(&numeric) {
                for (a, b) in ra.iter().zip(rn) {
                    assert!((a - b).abs() < 1e-5, "n={n} l={l}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn identity_observable_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = CircuitSpec::new(3, 2, 3).unwrap();
        let theta = ParamVector::uniform(&spec, &mut rng);
        let g = gradient_expectations(&spec, &random_x(&mut rng, 3), &theta, &[z("III")]).unwrap();
        assert!(g[0].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn final_rz_is_invisible_to_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = CircuitSpec::new(1, 2, 1).unwrap();
        let theta = ParamVector::uniform(&spec, &mut rng);
        let g = gradient_expectations(&spec, &[1.1], &theta, &[z("Z")]).unwrap();
        let last_omega = ParamVector::index(&spec, 1, 0, 2);
        assert!(g[0][last_omega].abs() < 1e-14);
        // Earlier angles do matter.
        assert!(g[0][ParamVector::index(&spec, 1, 0, 1)].abs() > 1e-6);
    }

    #[test]
    fn vjp_is_a_weighted_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let circ = Circuit::new(CircuitSpec::new(3, 2, 2).unwrap()).unwrap();
        let theta = ParamVector::uniform(circ.spec(), &mut rng);
        let x = random_x(&mut rng, 2);
        let obs = [z("ZII"), z("XXI"), ProjectorObservable::new(2, 3).unwrap().into()];
        let w = [0.3, -1.2, 2.0];
        let jac = circ.jacobian(&x, &theta, &obs).unwrap();
        let state = circ.evolve(&x, &theta).unwrap();
        let v = circ.vjp(&state, &x, &theta, &obs, &w).unwrap();
        for mu in 0..theta.len() {
            let want: f64 = (0..3).map(|k| w[k] * jac[k][mu]).sum();
            assert!((v[mu] - want).abs() < 1e-12);
        }
        assert!(circ.vjp(&state, &x, &theta, &obs, &w[..2]).is_err());
    }
}
