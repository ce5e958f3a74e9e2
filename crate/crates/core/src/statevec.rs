//! Dense state-vector simulation.
//!
//! Amplitudes are stored little-endian: qubit `k` is bit `k` of the basis
//! index, so `|q1 q0> = |01>` is index 1. Every kernel updates the state in
//! place; [`StateVector::applied`] wraps that in a by-value form.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default ceiling on register size: 2^24 amplitudes, about 256 MB.
pub const DEFAULT_QUBIT_CAP: usize = 24;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major 2x2 complex matrix acting on one qubit.
pub type Mat2 = [[Complex64; 2]; 2];

pub fn rx_matrix(angle: f64) -> Mat2 {
    let (s, c) = (angle / 2.0).sin_cos();
    let c = Complex64::new(c, 0.0);
    let ms = Complex64::new(0.0, -s);
    [[c, ms], [ms, c]]
}

pub fn ry_matrix(angle: f64) -> Mat2 {
    let (s, c) = (angle / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub fn rz_matrix(angle: f64) -> Mat2 {
    let half = angle / 2.0;
    [
        [Complex64::from_polar(1.0, -half), ZERO],
        [ZERO, Complex64::from_polar(1.0, half)],
    ]
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

pub fn mat2_adjoint(a: &Mat2) -> Mat2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    Rx { target: usize, angle: f64 },
    Ry { target: usize, angle: f64 },
    Rz { target: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

impl Gate {
    fn check(&self, n_qubits: usize) -> Result<()> {
        let bad = |q: usize| q >= n_qubits;
        match *self {
            Gate::Rx { target, .. } | Gate::Ry { target, .. } | Gate::Rz { target, .. } => {
                if bad(target) {
                    return Err(Error::contract(format!(
                        "target qubit {target} out of range for {n_qubits} qubits"
                    )));
                }
            }
            Gate::Cnot { control, target } => {
                if bad(control) || bad(target) {
                    return Err(Error::contract(format!(
                        "CNOT({control}->{target}) out of range for {n_qubits} qubits"
                    )));
                }
                if control == target {
                    return Err(Error::contract(format!(
                        "CNOT control equals target ({control})"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0...0>` on `n_qubits` qubits, subject to [`DEFAULT_QUBIT_CAP`].
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::zero_with_cap(n_qubits, DEFAULT_QUBIT_CAP)
    }

    pub fn zero_with_cap(n_qubits: usize, cap: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::contract("a state needs at least one qubit"));
        }
        if n_qubits > cap {
            return Err(Error::Resource {
                requested_qubits: n_qubits,
                dim: 1u128.checked_shl(n_qubits as u32).unwrap_or(u128::MAX),
                cap,
            });
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes. The length must be a power of two; normalization
    /// is the caller's responsibility.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::contract(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        Ok(Self {
            n_qubits: len.trailing_zeros() as usize,
            amps,
        })
    }

    /// Computational basis state `|index>`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut s = Self::zero(n_qubits)?;
        if index >= s.dim() {
            return Err(Error::contract(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        s.amps[0] = ZERO;
        s.amps[index] = ONE;
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }


    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Rescales to unit norm. A zero vector is left untouched.
    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            let inv = 1.0 / n;
            self.amps.iter_mut().for_each(|a| *a *= inv);
        }
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.check(self.n_qubits)?;
        match *gate {
            Gate::Rx { target, angle } => self.apply_single_qubit(target, &rx_matrix(angle)),
            Gate::Ry { target, angle } => self.apply_single_qubit(target, &ry_matrix(angle)),
            Gate::Rz { target, angle } => self.apply_rz(target, angle),
            Gate::Cnot { control, target } => self.apply_cnot(control, target),
        }
        Ok(())
    }

    /// By-value form of [`StateVector::apply`].
    pub fn applied(mut self, gate: &Gate) -> Result<Self> {
        self.apply(gate)?;
        Ok(self)
    }

    /// Applies an arbitrary 2x2 matrix to qubit `target`. The index is not
    /// validated beyond a debug assertion; callers go through [`Gate`] or the
    /// circuit evaluator, which check it up front.
    pub fn apply_single_qubit(&mut self, target: usize, m: &Mat2) {
        debug_assert!(target < self.n_qubits);
        let stride = 1usize << target;
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = m[0][0] * x + m[0][1] * y;
                *b = m[1][0] * x + m[1][1] * y;
            }
        }
    }

    fn apply_rz(&mut self, target: usize, angle: f64) {
        let stride = 1usize << target;
        let p0 = Complex64::from_polar(1.0, -angle / 2.0);
        let p1 = Complex64::from_polar(1.0, angle / 2.0);
        for block in self.amps.chunks_exact_mut(stride << 1) {
            let (lo, hi) = block.split_at_mut(stride);
            lo.iter_mut().for_each(|a| *a *= p0);
            hi.iter_mut().for_each(|b| *b *= p1);
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let cmask = 1usize << control;
        let tmask = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amps.swap(i, i | tmask);
            }
        }
    }

    /// Replaces the amplitudes with `out[j] = self[source[j]]`, using
    /// `scratch` as the destination buffer.
    pub(crate) fn gather(&mut self, source: &[u32], scratch: &mut Vec<Complex64>) {
        debug_assert_eq!(source.len(), self.amps.len());
        scratch.clear();
        scratch.extend(source.iter().map(|&s| self.amps[s as usize]));
        std::mem::swap(&mut self.amps, scratch);
    }

    fn check_same_dim(&self, other: &StateVector) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::contract(format!(
                "dimension mismatch: {} vs {} qubits",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_same_dim(other)?;
        Ok(inner_slices(&self.amps, &other.amps))
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }
}

pub(crate) fn inner_slices(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `(|0> + |1>)/sqrt(2)` on the given qubit of an otherwise-zero register;
/// handy in tests and examples.
pub fn plus_state(n_qubits: usize, qubit: usize) -> Result<StateVector> {
    let mut s = StateVector::zero(n_qubits)?;
    if qubit >= n_qubits {
        return Err(Error::contract(format!("qubit {qubit} out of range")));
    }
    s.amps[0] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    s.amps[1 << qubit] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    Ok(s)
}
