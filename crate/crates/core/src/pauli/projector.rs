use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use super::PauliString;
use crate::error::{Error, Result};
use crate::statevec::StateVector;

/// `|i><i|` on the lowest `measured_qubits` qubits, identity on the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProjectorObservable {
    measured_qubits: usize,
    basis_index: usize,
}

impl ProjectorObservable {
    pub fn new(measured_qubits: usize, basis_index: usize) -> Result<Self> {
        if measured_qubits == 0 || measured_qubits >= usize::BITS as usize {
            return Err(Error::contract(format!(
                "projector must measure at least one qubit, got {measured_qubits}"
            )));
        }
        if basis_index >= 1 << measured_qubits {
            return Err(Error::contract(format!(
                "basis index {basis_index} out of range for {measured_qubits} measured qubits"
            )));
        }
        Ok(Self {
            measured_qubits,
            basis_index,
        })
    }

    pub fn measured_qubits(&self) -> usize {
        self.measured_qubits
    }

    pub fn basis_index(&self) -> usize {
        self.basis_index
    }

    fn mask(&self) -> usize {
        (1 << self.measured_qubits) - 1
    }

    pub(crate) fn check_qubits(&self, n_qubits: usize) -> Result<()> {
        if self.measured_qubits > n_qubits {
            return Err(Error::contract(format!(
                "projector measures {} qubits of a {n_qubits}-qubit register",
                self.measured_qubits
            )));
        }
        Ok(())
    }

    /// Probability that the measured qubits read `basis_index`.
    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        self.check_qubits(state.n_qubits())?;
        let (mask, idx) = (self.mask(), self.basis_index);
        let p: f64 = state
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(j, _)| j & mask == idx)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        Ok(p.clamp(0.0, 1.0))
    }

    pub(crate) fn accumulate(&self, amps: &[Complex64], weight: f64, out: &mut [Complex64]) {
        let (mask, idx) = (self.mask(), self.basis_index);
        for (j, a) in amps.iter().enumerate() {
            if j & mask == idx {
                out[j] += a * weight;
            }
        }
    }
}

impl fmt::Display for ProjectorObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}:{}", self.measured_qubits, self.basis_index)
    }
}

impl FromStr for ProjectorObservable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::contract(format!("invalid projector {s:?}, expected P<m>:<i>"));
        let rest = s.strip_prefix('P').ok_or_else(bad)?;
        let (m, i) = rest.split_once(':').ok_or_else(bad)?;
        let m = m.parse().map_err(|_| bad())?;
        let i = i.parse().map_err(|_| bad())?;
        Self::new(m, i)
    }
}

/// Expands `|i><i| (x) I` over Pauli strings:
/// `prod_j (I + (-1)^{i_j} Z_j) / 2` on the measured qubits.
pub fn pauli_decompose_projector(
    proj: &ProjectorObservable,
    n_qubits: usize,
) -> Result<BTreeMap<PauliString, f64>> {
    proj.check_qubits(n_qubits)?;
    let m = proj.measured_qubits;
    let scale = 0.5f64.powi(m as i32);
    let mut out = BTreeMap::new();
    for subset in 0..1u64 << m {
        let parity = (subset & proj.basis_index as u64).count_ones() % 2;
        let coeff = if parity == 0 { scale } else { -scale };
        out.insert(PauliString::z_type(n_qubits, subset)?, coeff);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn parse_and_display() {
        let p: ProjectorObservable = "P2:3".parse().unwrap();
        assert_eq!((p.measured_qubits(), p.basis_index()), (2, 3));
        assert_eq!(p.to_string(), "P2:3");
        assert!("P2:4".parse::<ProjectorObservable>().is_err());
        assert!("Q1:0".parse::<ProjectorObservable>().is_err());
        assert!("P0:0".parse::<ProjectorObservable>().is_err());
    }

    #[test]
    fn expectation_examples() {
        let zero = StateVector::zero(2).unwrap();
        assert_eq!(ProjectorObservable::new(2, 0).unwrap().expectation(&zero).unwrap(), 1.0);
        let plus = StateVector::from_amplitudes(vec![
            Complex64::new(FRAC_1_SQRT_2, 0.0),
            Complex64::new(FRAC_1_SQRT_2, 0.0),
        ])
        .unwrap();
        let p = ProjectorObservable::new(1, 1).unwrap();
        assert!((p.expectation(&plus).unwrap() - 0.5).abs() < 1e-15);
        let too_big = ProjectorObservable::new(2, 0).unwrap();
        assert!(too_big.expectation(&plus).is_err());
    }

    #[test]
    fn orthogonal_projectors() {
        // P_a P_b = 0 for a != b: the masks select disjoint amplitude sets.
        let a = ProjectorObservable::new(2, 1).unwrap();
        let b = ProjectorObservable::new(2, 2).unwrap();
        let amps: Vec<Complex64> = (0..8).map(|i| Complex64::new(1.0 + i as f64, 0.5)).collect();
        let mut pb = vec![Complex64::new(0.0, 0.0); 8];
        b.accumulate(&amps, 1.0, &mut pb);
        let mut pab = vec![Complex64::new(0.0, 0.0); 8];
        a.accumulate(&pb, 1.0, &mut pab);
        assert!(pab.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn decomposition_examples() {
        let d = pauli_decompose_projector(&ProjectorObservable::new(1, 0).unwrap(), 1).unwrap();
        assert_eq!(d[&"I".parse().unwrap()], 0.5);
        assert_eq!(d[&"Z".parse().unwrap()], 0.5);
        let d = pauli_decompose_projector(&ProjectorObservable::new(1, 1).unwrap(), 1).unwrap();
        assert_eq!(d[&"Z".parse().unwrap()], -0.5);
        let d = pauli_decompose_projector(&ProjectorObservable::new(2, 0).unwrap(), 2).unwrap();
        assert_eq!(d.len(), 4);
        for s in ["II", "ZI", "IZ", "ZZ"] {
            assert_eq!(d[&s.parse().unwrap()], 0.25);
        }
    }
}
