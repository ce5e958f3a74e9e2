use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::statevec::StateVector;

/// Most qubits a bit-packed string can hold.
pub const MAX_STRING_QUBITS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis in symplectic form. Letter `j` of
/// the textual form acts on qubit `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_STRING_QUBITS {
            return Err(Error::contract(format!(
                "Pauli strings need 1..={MAX_STRING_QUBITS} qubits, got {n_qubits}"
            )));
        }
        Ok(Self { n_qubits, x: 0, z: 0 })
    }

    pub fn from_letters(letters: &[Pauli]) -> Result<Self> {
        let mut s = Self::identity(letters.len())?;
        for (q, p) in letters.iter().enumerate() {
            s.set(q, *p);
        }
        Ok(s)
    }

    /// Z on every qubit whose bit is set in `mask`.
    pub fn z_type(n_qubits: usize, mask: u64) -> Result<Self> {
        let mut s = Self::identity(n_qubits)?;
        s.z = mask & low_mask(n_qubits);
        Ok(s)
    }

    pub(crate) fn set(&mut self, qubit: usize, p: Pauli) {
        let bit = 1u64 << qubit;
        let (x, z) = p.bits();
        self.x = if x { self.x | bit } else { self.x & !bit };
        self.z = if z { self.z | bit } else { self.z & !bit };
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn letter(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(self.x >> qubit & 1 == 1, self.z >> qubit & 1 == 1)
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.n_qubits).map(|q| self.letter(q)).collect()
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Number of non-identity letters.
    pub fn locality(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    pub fn is_identity(&self) -> bool {
        self.x | self.z == 0
    }

    /// Diagonal in the computational basis (letters in {I, Z}).
    pub fn is_z_type(&self) -> bool {
        self.x == 0
    }

    /// Symplectic criterion: the strings commute iff they anticommute on an
    /// even number of sites.
    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::contract(format!(
                "length mismatch: {} vs {}",
                self.n_qubits, other.n_qubits
            )));
        }
        let anti = (self.x & other.z) ^ (self.z & other.x);
        Ok(anti.count_ones() % 2 == 0)
    }

    fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Global phase `i^{#Y}` of the string acting on a basis state.
    fn y_phase(&self) -> Complex64 {
        match self.y_count() % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }

    fn check_state(&self, state: &StateVector) -> Result<()> {
        if state.n_qubits() != self.n_qubits {
            return Err(Error::contract(format!(
                "Pauli string on {} qubits applied to a {}-qubit state",
                self.n_qubits,
                state.n_qubits()
            )));
        }
        Ok(())
    }

    /// `out += weight * P|state>`.
    pub(crate) fn accumulate(&self, amps: &[Complex64], weight: f64, out: &mut [Complex64]) {
        let phase = self.y_phase() * weight;
        let (x, z) = (self.x as usize, self.z as usize);
        for (j, a) in amps.iter().enumerate() {
            let sign = if (j & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            out[j ^ x] += phase * sign * a;
        }
    }

    /// `<state|P|state>`, clamped to [-1, 1].
    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        self.check_state(state)?;
        let amps = state.amplitudes();
        let (x, z) = (self.x as usize, self.z as usize);
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, a) in amps.iter().enumerate() {
            let term = amps[j ^ x].conj() * a;
            if (j & z).count_ones() % 2 == 0 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        let value = acc * self.y_phase();
        debug_assert!(value.im.abs() < 1e-9, "imaginary residue {}", value.im);
        Ok(value.re.clamp(-1.0, 1.0))
    }
}

fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n_qubits {
            write!(f, "{}", self.letter(q).letter())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| match c {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::contract(format!(
                    "invalid Pauli letter {other:?} in {s:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_letters(&letters)
    }
}

/// Lexicographic successor of a sorted k-subset of `0..n`.
fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    for i in (0..k).rev() {
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `n_classes` mutually commuting Z-type strings of smallest locality,
/// ordered by locality and then by the sorted list of qubits they act on.
pub fn min_locality_commuting_set(n_qubits: usize, n_classes: usize) -> Result<Vec<PauliString>> {
    PauliString::identity(n_qubits)?;
    let available = if n_qubits >= 63 {
        usize::MAX
    } else {
        (1usize << n_qubits) - 1
    };
    if n_classes > available {
        return Err(Error::Capacity {
            requested: n_classes,
            available,
        });
    }
    let mut out = Vec::with_capacity(n_classes);
    'outer: for k in 1..=n_qubits {
        let mut comb: Vec<usize> = (0..k).collect();
        loop {
            if out.len() == n_classes {
                break 'outer;
            }
            let mask = comb.iter().fold(0u64, |m, &q| m | 1 << q);
            out.push(PauliString::z_type(n_qubits, mask)?);
            if !next_combination(&mut comb, n_qubits) {
                break;
            }
        }
    }
    Ok(out)
}

/// `{X^k, Y^k, Z^k}` on the first `k` qubits, identity elsewhere.
pub fn uniform_locality_set(n_qubits: usize, k: usize) -> Result<Vec<PauliString>> {
    if k == 0 || k > n_qubits {
        return Err(Error::contract(format!(
            "locality {k} outside 1..={n_qubits}"
        )));
    }
    [Pauli::X, Pauli::Y, Pauli::Z]
        .into_iter()
        .map(|p| {
            let mut s = PauliString::identity(n_qubits)?;
            (0..k).for_each(|q| s.set(q, p));
            Ok(s)
        })
        .collect()
}
