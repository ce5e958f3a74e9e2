//! Model heads: observable sets, losses, the argmax prediction rule and
//! macro-averaged F1.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitSpec, ParamVector};
use crate::error::{Error, Result};
use crate::pauli::{min_locality_commuting_set, Observable, Pauli, PauliString, ProjectorObservable};

/// Floor on the softmax probability inside the log.
const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    PauliCE,
    PauliF,
    ProjCE,
    ProjF,
    PauliNonCommuting,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::PauliCE,
        ModelKind::PauliF,
        ModelKind::ProjCE,
        ModelKind::ProjF,
        ModelKind::PauliNonCommuting,
    ];

    /// The four observable/loss pairings with commuting observables.
    pub const COMMUTING: [ModelKind; 4] = [
        ModelKind::PauliCE,
        ModelKind::PauliF,
        ModelKind::ProjCE,
        ModelKind::ProjF,
    ];

    pub fn loss(self) -> LossKind {
        match self {
            ModelKind::PauliF | ModelKind::ProjF => LossKind::Fidelity,
            _ => LossKind::CrossEntropy,
        }
    }

    pub fn observable_kind(self) -> ObservableSetKind {
        match self {
            ModelKind::PauliCE | ModelKind::PauliF => ObservableSetKind::PauliCommuting,
            ModelKind::ProjCE | ModelKind::ProjF => ObservableSetKind::Projector,
            ModelKind::PauliNonCommuting => ObservableSetKind::PauliNonCommuting,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::PauliCE => "PauliCE",
            ModelKind::PauliF => "PauliF",
            ModelKind::ProjCE => "ProjCE",
            ModelKind::ProjF => "ProjF",
            ModelKind::PauliNonCommuting => "PauliNonCommuting",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::contract(format!("unknown model kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    CrossEntropy,
    Fidelity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObservableSetKind {
    PauliCommuting,
    PauliNonCommuting,
    Projector,
}

/// One observable per class; member `k` scores class `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSet {
    kind: ObservableSetKind,
    members: Vec<Observable>,
}

impl ObservableSet {
    pub fn new(kind: ObservableSetKind, members: Vec<Observable>) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::contract("an observable set needs at least two members"));
        }
        match kind {
            ObservableSetKind::PauliCommuting | ObservableSetKind::PauliNonCommuting => {
                let paulis: Vec<PauliString> = members
                    .iter()
                    .map(|o| match o {
                        Observable::Pauli(p) => Ok(*p),
                        Observable::Projector(p) => {
                            Err(Error::contract(format!("{p} in a Pauli observable set")))
                        }
                    })
                    .collect::<Result<_>>()?;
                let mut all_commute = true;
                for (i, a) in paulis.iter().enumerate() {
                    for b in &paulis[i + 1..] {
                        all_commute &= a.commutes(b)?;
                    }
                }
                match (kind, all_commute) {
                    (ObservableSetKind::PauliCommuting, false) => {
                        return Err(Error::contract("commuting set has a non-commuting pair"))
                    }
                    (ObservableSetKind::PauliNonCommuting, true) => {
                        return Err(Error::contract("non-commuting set has only commuting pairs"))
                    }
                    _ => {}
                }
            }
            ObservableSetKind::Projector => {
                let mut seen = Vec::with_capacity(members.len());
                let mut m = None;
                for o in &members {
                    let Observable::Projector(p) = o else {
                        return Err(Error::contract(format!("{o} in a projector set")));
                    };
                    if *m.get_or_insert(p.measured_qubits()) != p.measured_qubits() {
                        return Err(Error::contract("projectors measure different qubit counts"));
                    }
                    if seen.contains(&p.basis_index()) {
                        return Err(Error::contract(format!("duplicate projector {p}")));
                    }
                    seen.push(p.basis_index());
                }
            }
        }
        Ok(Self { kind, members })
    }

    /// The `n_classes` lowest-locality Z-type strings.
    pub fn pauli_commuting(n_qubits: usize, n_classes: usize) -> Result<Self> {
        let members = min_locality_commuting_set(n_qubits, n_classes)?
            .into_iter()
            .map(Observable::from)
            .collect();
        Self::new(ObservableSetKind::PauliCommuting, members)
    }

    /// Member `k` is letter `X, Y, Z` (cycling) on qubit `k / 3`, so three
    /// classes give `{X, Y, Z}` on qubit 0.
    pub fn pauli_non_commuting(n_qubits: usize, n_classes: usize) -> Result<Self> {
        let available = 3 * n_qubits;
        if n_classes > available {
            return Err(Error::Capacity {
                requested: n_classes,
                available,
            });
        }
        let letters = [Pauli::X, Pauli::Y, Pauli::Z];
        let members = (0..n_classes)
            .map(|k| {
                let mut p = PauliString::identity(n_qubits)?;
                p.set(k / 3, letters[k % 3]);
                Ok(p.into())
            })
            .collect::<Result<_>>()?;
        Self::new(ObservableSetKind::PauliNonCommuting, members)
    }

    /// `|bin(k)><bin(k)|` on the lowest `ceil(log2 K)` qubits.
    pub fn projectors(n_qubits: usize, n_classes: usize) -> Result<Self> {
        let m = measured_qubits_for(n_classes);
        if m > n_qubits {
            return Err(Error::Capacity {
                requested: n_classes,
                available: 1 << n_qubits.min(usize::BITS as usize - 1),
            });
        }
        Self::projectors_on(m, n_classes)
    }

    /// Projectors `0..n_classes` on `m` measured qubits.
    pub fn projectors_on(m: usize, n_classes: usize) -> Result<Self> {
        let members = (0..n_classes)
            .map(|i| Ok(ProjectorObservable::new(m, i)?.into()))
            .collect::<Result<_>>()?;
        Self::new(ObservableSetKind::Projector, members)
    }

    pub fn for_model(kind: ModelKind, n_qubits: usize, n_classes: usize) -> Result<Self> {
        match kind.observable_kind() {
            ObservableSetKind::PauliCommuting => Self::pauli_commuting(n_qubits, n_classes),
            ObservableSetKind::PauliNonCommuting => Self::pauli_non_commuting(n_qubits, n_classes),
            ObservableSetKind::Projector => Self::projectors(n_qubits, n_classes),
        }
    }

    pub fn kind(&self) -> ObservableSetKind {
        self.kind
    }

    pub fn members(&self) -> &[Observable] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `ceil(log2 K)`, at least 1.
pub fn measured_qubits_for(n_classes: usize) -> usize {
    (n_classes.max(2) - 1).ilog2() as usize + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub loss: LossKind,
    pub temperature: f64,
    pub lambda: f64,
}

impl LossConfig {
    pub const DEFAULT_TEMPERATURE: f64 = 0.01;
    pub const DEFAULT_LAMBDA: f64 = 1.0;

    pub fn new(loss: LossKind, temperature: f64, lambda: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::contract(format!("temperature must be positive, got {temperature}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::contract(format!("lambda must be non-negative, got {lambda}")));
        }
        Ok(Self {
            loss,
            temperature,
            lambda,
        })
    }

    pub fn for_model(kind: ModelKind) -> Self {
        Self {
            loss: kind.loss(),
            temperature: Self::DEFAULT_TEMPERATURE,
            lambda: Self::DEFAULT_LAMBDA,
        }
    }

    pub fn value(&self, outputs: &[f64], label: usize) -> Result<f64> {
        match self.loss {
            LossKind::CrossEntropy => cross_entropy_loss(outputs, label, self.temperature),
            LossKind::Fidelity => fidelity_loss(outputs, label, self.lambda),
        }
    }

    /// Loss and its gradient with respect to the model outputs.
    pub fn value_and_grad(&self, outputs: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        check_label(outputs, label)?;
        match self.loss {
            LossKind::CrossEntropy => {
                let p = softmax_t(outputs, self.temperature)?;
                let loss = -p[label].max(LOG_FLOOR).ln();
                let grad = p
                    .iter()
                    .enumerate()
                    .map(|(k, pk)| (pk - if k == label { 1.0 } else { 0.0 }) / self.temperature)
                    .collect();
                Ok((loss, grad))
            }
            LossKind::Fidelity => {
                let loss = fidelity_loss(outputs, label, self.lambda)?;
                let grad = (0..outputs.len())
                    .map(|k| if k == label { -1.0 } else { self.lambda })
                    .collect();
                Ok((loss, grad))
            }
        }
    }
}

fn check_label(outputs: &[f64], label: usize) -> Result<()> {
    if outputs.len() < 2 {
        return Err(Error::contract(format!("need at least two classes, got {}", outputs.len())));
    }
    if label >= outputs.len() {
        return Err(Error::contract(format!(
            "label {label} out of range for {} classes",
            outputs.len()
        )));
    }
    Ok(())
}

/// `softmax(z / T)` with max-subtraction.
pub fn softmax_t(z: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::contract(format!("temperature must be positive, got {temperature}")));
    }
    if z.len() < 2 {
        return Err(Error::contract("softmax needs at least two entries"));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| ((v - max) / temperature).exp()).collect();
    let sum: f64 = e.iter().sum();
    Ok(e.into_iter().map(|v| v / sum).collect())
}

pub fn cross_entropy_loss(outputs: &[f64], label: usize, temperature: f64) -> Result<f64> {
    check_label(outputs, label)?;
    Ok(-softmax_t(outputs, temperature)?[label].max(LOG_FLOOR).ln())
}

/// `1 - f_label + lambda * sum_{j != label} f_j`.
pub fn fidelity_loss(fidelities: &[f64], label: usize, lambda: f64) -> Result<f64> {
    check_label(fidelities, label)?;
    let others: f64 = fidelities
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != label)
        .map(|(_, f)| f)
        .sum();
    Ok(1.0 - fidelities[label] + lambda * others)
}

/// Argmax, ties to the lowest index.
pub fn predict(outputs: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in outputs.iter().enumerate().skip(1) {
        if *v > outputs[best] {
            best = k;
        }
    }
    best
}

/// Unweighted mean of per-class F1 over all `n_classes` classes.
pub fn macro_f1(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::contract(format!(
            "{} labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if n_classes == 0 {
        return Err(Error::contract("macro F1 over zero classes"));
    }
    let (mut tp, mut fp, mut fnn) = (vec![0usize; n_classes], vec![0usize; n_classes], vec![0usize; n_classes]);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= n_classes || p >= n_classes {
            return Err(Error::contract(format!("label out of range for {n_classes} classes")));
        }
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fnn[t] += 1;
        }
    }
    let total: f64 = (0..n_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fnn[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / n_classes as f64)
}

/// Circuit, observable set and loss bundled for training and evaluation.
#[derive(Debug, Clone)]
pub struct Model {
    circuit: Circuit,
    observables: ObservableSet,
    loss: LossConfig,
}

impl Model {
    pub fn new(spec: CircuitSpec, observables: ObservableSet, loss: LossConfig) -> Result<Self> {
        let circuit = Circuit::new(spec)?;
        for o in observables.members() {
            o.check_qubits(spec.n_qubits)?;
        }
        let loss = LossConfig::new(loss.loss, loss.temperature, loss.lambda)?;
        Ok(Self {
            circuit,
            observables,
            loss,
        })
    }

    /// The standard model of `kind` for `n_classes` classes.
    pub fn for_kind(
        kind: ModelKind,
        spec: CircuitSpec,
        n_classes: usize,
        temperature: f64,
        lambda: f64,
    ) -> Result<Self> {
        let observables = ObservableSet::for_model(kind, spec.n_qubits, n_classes)?;
        Self::new(spec, observables, LossConfig::new(kind.loss(), temperature, lambda)?)
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn spec(&self) -> &CircuitSpec {
        self.circuit.spec()
    }

    pub fn observables(&self) -> &ObservableSet {
        &self.observables
    }

    pub fn loss_config(&self) -> &LossConfig {
        &self.loss
    }

    pub fn n_classes(&self) -> usize {
        self.observables.len()
    }

    pub fn outputs(&self, x: &[f64], theta: &ParamVector) -> Result<Vec<f64>> {
        self.circuit.expectations(x, theta, self.observables.members())
    }

    pub fn loss(&self, x: &[f64], label: usize, theta: &ParamVector) -> Result<f64> {
        self.loss.value(&self.outputs(x, theta)?, label)
    }

    /// Per-sample loss and its gradient in the circuit parameters.
    pub fn loss_and_grad(&self, x: &[f64], label: usize, theta: &ParamVector) -> Result<(f64, Vec<f64>)> {
        let state = self.circuit.evolve(x, theta)?;
        let outputs = self
            .observables
            .members()
            .iter()
            .map(|o| o.expectation(&state))
            .collect::<Result<Vec<_>>>()?;
        let (loss, dz) = self.loss.value_and_grad(&outputs, label)?;
        let grad = self
            .circuit
            .vjp(&state, x, theta, self.observables.members(), &dz)?;
        Ok((loss, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_examples() {
        for c in [-3.0, 0.0, 0.7] {
            for t in [1e-3, 1.0, 10.0] {
                for p in softmax_t(&[c, c, c], t).unwrap() {
                    assert!((p - 1.0 / 3.0).abs() < 1e-15);
                }
            }
        }
        let p = softmax_t(&[1.0, -1.0, 0.0], 1e-4).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        let p = softmax_t(&[1.0, -1.0], 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 1.0 / e)).abs() < 1e-15);
        assert!((p[0] - 0.8808).abs() < 1e-4);
        assert!(softmax_t(&[1.0, 2.0], 0.0).is_err());
        assert!(softmax_t(&[1.0, 2.0], -1.0).is_err());
    }

    #[test]
    fn softmax_survives_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let k = rng.random_range(2..8);
            let z: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let t = [1e-4, 1.0, 1e4][rng.random_range(0..3)];
            let p = softmax_t(&z, t).unwrap();
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_examples() {
        let l = cross_entropy_loss(&[0.2, 0.2, 0.2], 1, 0.5).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-14);
        assert!(cross_entropy_loss(&[1.0, -1.0, -1.0], 0, 1e-3).unwrap() < 1e-12);
        // Confident and wrong: floored, not infinite.
        assert!(cross_entropy_loss(&[1.0, -1.0], 1, 1e-6).unwrap().is_finite());
        assert!(cross_entropy_loss(&[1.0, -1.0], 2, 1.0).is_err());
    }

    #[test]
    fn fidelity_examples() {
        assert_eq!(fidelity_loss(&[1.0, 0.0, 0.0], 0, 3.0).unwrap(), 0.0);
        assert_eq!(fidelity_loss(&[0.25; 4], 0, 1.0).unwrap(), 1.5);
    }

    #[test]
    fn predict_ties_go_low() {
        assert_eq!(predict(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(predict(&[0.5, 0.5]), 0);
        assert_eq!(predict(&[-1.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn macro_f1_examples() {
        assert_eq!(macro_f1(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap(), 1.0);
        assert!((macro_f1(&[0, 0, 1, 1], &[0, 1, 0, 1], 2).unwrap() - 0.5).abs() < 1e-15);
        let f = macro_f1(&[0, 1, 2, 0, 1, 2], &[0; 6], 3).unwrap();
        assert!((f - 0.5 / 3.0).abs() < 1e-15);
        assert!(macro_f1(&[0], &[0, 1], 2).is_err());
        // A class missing from both sides counts as zero.
        assert!((macro_f1(&[0, 1], &[0, 1], 3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn observable_sets() {
        let s = ObservableSet::pauli_commuting(4, 5).unwrap();
        assert_eq!(s.len(), 5);
        let s = ObservableSet::pauli_non_commuting(2, 3).unwrap();
        let names: Vec<String> = s.members().iter().map(|o| o.to_string()).collect();
        assert_eq!(names, ["XI", "YI", "ZI"]);
        let s = ObservableSet::projectors(3, 5).unwrap();
        assert!(s.members().iter().all(|o| o.to_string().starts_with("P3:")));
        assert!(ObservableSet::projectors(2, 5).is_err());
        assert!(ObservableSet::pauli_commuting(2, 4).is_err());

        let xx: Observable = "XX".parse().unwrap();
        let zz: Observable = "ZZ".parse().unwrap();
        let xi: Observable = "XI".parse().unwrap();
        let zi: Observable = "ZI".parse().unwrap();
        assert!(ObservableSet::new(ObservableSetKind::PauliCommuting, vec![xx, zz]).is_ok());
        assert!(ObservableSet::new(ObservableSetKind::PauliNonCommuting, vec![xx, zz]).is_err());
        assert!(ObservableSet::new(ObservableSetKind::PauliCommuting, vec![xi, zi]).is_err());
        let p0: Observable = "P2:0".parse().unwrap();
        let p1: Observable = "P1:1".parse().unwrap();
        assert!(ObservableSet::new(ObservableSetKind::Projector, vec![p0, p1]).is_err());
        assert!(ObservableSet::new(ObservableSetKind::Projector, vec![p0, p0]).is_err());
    }

    #[test]
    fn measured_qubit_counts() {
        let got: Vec<usize> = (2..=9).map(measured_qubits_for).collect();
        assert_eq!(got, vec![1, 2, 2, 3, 3, 3, 3, 4]);
    }

    #[test]
    fn model_kind_strings() {
        for k in ModelKind::ALL {
            assert_eq!(k.to_string().parse::<ModelKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
        assert!("ProjX".parse::<ModelKind>().is_err());
    }

    #[test]
    fn loss_config_contracts() {
        assert!(LossConfig::new(LossKind::CrossEntropy, 0.0, 1.0).is_err());
        assert!(LossConfig::new(LossKind::Fidelity, 1.0, -0.1).is_err());
        let c = LossConfig::for_model(ModelKind::ProjF);
        assert_eq!((c.loss, c.temperature, c.lambda), (LossKind::Fidelity, 0.01, 1.0));
    }

    #[test]
    fn output_gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for loss in [LossKind::CrossEntropy, LossKind::Fidelity] {
            let cfg = LossConfig::new(loss, 0.3, 0.7).unwrap();
            for _ in 0..20 {
                let z: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let y = rng.random_range(0..4);
                let (_, g) = cfg.value_and_grad(&z, y).unwrap();
                for k in 0..4 {
                    let h = 1e-6;
                    let mut zp = z.clone();
                    zp[k] += h;
                    let mut zm = z.clone();
                    zm[k] -= h;
                    let fd = (cfg.value(&zp, y).unwrap() - cfg.value(&zm, y).unwrap()) / (2.0 * h);
                    assert!((fd - g[k]).abs() < 1e-7);
                }
            }
        }
    }
}
