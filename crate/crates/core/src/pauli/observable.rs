use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use super::{PauliString, ProjectorObservable};
use crate::error::{Error, Result};
use crate::statevec::StateVector;

/// A single class observable: a Pauli string or a basis projector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    Pauli(PauliString),
    Projector(ProjectorObservable),
}

impl Observable {
    pub fn check_qubits(&self, n_qubits: usize) -> Result<()> {
        match self {
            Observable::Pauli(p) if p.n_qubits() != n_qubits => Err(Error::contract(format!(
                "Pauli string {p} does not act on {n_qubits} qubits"
            ))),
            Observable::Pauli(_) => Ok(()),
            Observable::Projector(p) => p.check_qubits(n_qubits),
        }
    }

    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        match self {
            Observable::Pauli(p) => p.expectation(state),
            Observable::Projector(p) => p.expectation(state),
        }
    }

    /// `out += weight * O|amps>`.
    pub(crate) fn accumulate(&self, amps: &[Complex64], weight: f64, out: &mut [Complex64]) {
        match self {
            Observable::Pauli(p) => p.accumulate(amps, weight, out),
            Observable::Projector(p) => p.accumulate(amps, weight, out),
        }
    }
}

impl From<PauliString> for Observable {
    fn from(p: PauliString) -> Self {
        Observable::Pauli(p)
    }
}

impl From<ProjectorObservable> for Observable {
    fn from(p: ProjectorObservable) -> Self {
        Observable::Projector(p)
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable::Pauli(p) => p.fmt(f),
            Observable::Projector(p) => p.fmt(f),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.starts_with('P') {
            s.parse().map(Observable::Projector)
        } else {
            s.parse().map(Observable::Pauli)
        }
    }
}
