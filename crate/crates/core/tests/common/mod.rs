//! Dense-matrix reference implementations. Everything here is built from
//! explicit `2^n x 2^n` matrices and never calls into the fused simulator.

#![allow(dead_code)]

use num_complex::Complex64;
use qmclab::pauli::{Observable, Pauli, PauliString};

pub type Matrix = Vec<Vec<Complex64>>;

const O: Complex64 = Complex64::new(0.0, 0.0);
const I1: Complex64 = Complex64::new(1.0, 0.0);
const IM: Complex64 = Complex64::new(0.0, 1.0);

pub fn zeros(dim: usize) -> Matrix {
    vec![vec![O; dim]; dim]
}

pub fn identity(dim: usize) -> Matrix {
    let mut m = zeros(dim);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = I1;
    }
    m
}

pub fn pauli_2x2(p: Pauli) -> [[Complex64; 2]; 2] {
    match p {
        Pauli::I => [[I1, O], [O, I1]],
        Pauli::X => [[O, I1], [I1, O]],
        Pauli::Y => [[O, -IM], [IM, O]],
        Pauli::Z => [[I1, O], [O, -I1]],
    }
}

/// Tensor product where `ops[j]` acts on qubit `j` (bit `j` of the index).
pub fn kron_qubits(ops: &[[[Complex64; 2]; 2]]) -> Matrix {
    let n = ops.len();
    let dim = 1 << n;
    let mut m = zeros(dim);
    for (r, row) in m.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = (0..n).fold(I1, |acc, j| acc * ops[j][(r >> j) & 1][(c >> j) & 1]);
        }
    }
    m
}

pub fn dense_pauli(p: &PauliString) -> Matrix {
    let ops: Vec<_> = p.letters().into_iter().map(pauli_2x2).collect();
    kron_qubits(&ops)
}

/// `|i><i|` on the low `m` qubits tensored with identity.
pub fn dense_projector(m: usize, index: usize, n: usize) -> Matrix {
    let dim = 1 << n;
    let mut out = zeros(dim);
    for (r, row) in out.iter_mut().enumerate() {
        if r & ((1 << m) - 1) == index {
            row[r] = I1;
        }
    }
    out
}

pub fn dense_observable(o: &Observable, n: usize) -> Matrix {
    match o {
        Observable::Pauli(p) => dense_pauli(p),
        Observable::Projector(p) => dense_projector(p.measured_qubits(), p.basis_index(), n),
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let d = a.len();
    let mut out = zeros(d);
    for i in 0..d {
        for k in 0..d {
            if a[i][k] == O {
                continue;
            }
            for j in 0..d {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn matvec(a: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn add_scaled(acc: &mut Matrix, m: &Matrix, s: f64) {
    for (ra, rm) in acc.iter_mut().zip(m) {
        for (a, v) in ra.iter_mut().zip(rm) {
            *a += v * s;
        }
    }
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| (x - y).norm()))
        .fold(0.0, f64::max)
}

pub fn trace(a: &Matrix) -> Complex64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

pub fn expectation(op: &Matrix, psi: &[Complex64]) -> f64 {
    let v = matvec(op, psi);
    psi.iter().zip(&v).map(|(a, b)| a.conj() * b).sum::<Complex64>().re
}

fn rx(a: f64) -> [[Complex64; 2]; 2] {
    let (c, s) = ((a / 2.0).cos(), (a / 2.0).sin());
    [[I1 * c, -IM * s], [-IM * s, I1 * c]]
}

fn ry(a: f64) -> [[Complex64; 2]; 2] {
    let (c, s) = ((a / 2.0).cos(), (a / 2.0).sin());
    [[I1 * c, -I1 * s], [I1 * s, I1 * c]]
}

fn rz(a: f64) -> [[Complex64; 2]; 2] {
    [[Complex64::from_polar(1.0, -a / 2.0), O], [O, Complex64::from_polar(1.0, a / 2.0)]]
}

fn on_qubit(n: usize, q: usize, g: [[Complex64; 2]; 2]) -> Matrix {
    let ops: Vec<_> = (0..n).map(|j| if j == q { g } else { pauli_2x2(Pauli::I) }).collect();
    kron_qubits(&ops)
}

fn cnot(n: usize, control: usize, target: usize) -> Matrix {
    let dim = 1 << n;
    let mut m = zeros(dim);
    for c in 0..dim {
        let r = if (c >> control) & 1 == 1 { c ^ (1 << target) } else { c };
        m[r][c] = I1;
    }
    m
}

/// Ansatz unitary built gate by gate: per layer `RX(x[q mod f])` on every
/// qubit, then `RZ(omega) RY(theta) RZ(phi)` with parameters at
/// `(layer * n + q) * 3 + {0, 1, 2}`, then the CNOT ring `q -> q + 1`.
pub fn ansatz_unitary(n: usize, n_layers: usize, x: &[f64], params: &[f64]) -> Matrix {
    let mut u = identity(1 << n);
    let mut push = |g: Matrix| u = matmul(&g, &u);
    for l in 0..n_layers {
        for q in 0..n {
            push(on_qubit(n, q, rx(x[q % x.len()])));
        }
        for q in 0..n {
            let p = &params[(l * n + q) * 3..];
            push(on_qubit(n, q, rz(p[0])));
            push(on_qubit(n, q, ry(p[1])));
            push(on_qubit(n, q, rz(p[2])));
        }
        if n > 1 {
            for q in 0..n {
                push(cnot(n, q, (q + 1) % n));
            }
        }
    }
    u
}

pub fn ansatz_state(n: usize, n_layers: usize, x: &[f64], params: &[f64]) -> Vec<Complex64> {
    let u = ansatz_unitary(n, n_layers, x, params);
    u.iter().map(|row| row[0]).collect()
}

/// Class scores `<psi|O_k|psi>` from dense matrices.
pub fn dense_outputs(n: usize, n_layers: usize, x: &[f64], params: &[f64], obs: &[Observable]) -> Vec<f64> {
    let psi = ansatz_state(n, n_layers, x, params);
    obs.iter().map(|o| expectation(&dense_observable(o, n), &psi)).collect()
}

/// `-ln softmax(z / T)[y]` through log-sum-exp.
pub fn ce_reference(z: &[f64], y: usize, t: f64) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m / t + z.iter().map(|v| ((v - m) / t).exp()).sum::<f64>().ln();
    lse - z[y] / t
}

/// `(1 - f_y) + lambda * sum_{j != y} f_j`.
pub fn fidelity_reference(f: &[f64], y: usize, lambda: f64) -> f64 {
    let others: f64 = f.iter().enumerate().filter(|(j, _)| *j != y).map(|(_, v)| v).sum();
    1.0 - f[y] + lambda * others
}

/// All `4^n` Pauli strings in index order.
pub fn all_strings(n: usize) -> Vec<PauliString> {
    let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    (0..4usize.pow(n as u32))
        .map(|mut code| {
            let word: Vec<Pauli> = (0..n)
                .map(|_| {
                    let l = letters[code % 4];
                    code /= 4;
                    l
                })
                .collect();
            PauliString::from_letters(&word).unwrap()
        })
        .collect()
}
