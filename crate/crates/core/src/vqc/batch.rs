//! Batched evaluation over a dataset whose embedded states are cached.
//!
//! For small registers the readout observable is pulled back through the
//! variational circuit once (Heisenberg picture), so each sample costs a
//! single quadratic form. Gradients use the same parameter-shift rule as
//! [`super::param_shift_grad`], applied to the loss-weighted mixture
//! `rho_w = sum_s w_s |psi_s><psi_s|`, which is exact because `<Z>` is linear
//! in the state. A `dim x dim` operator is stored as a `2n`-qubit register
//! (row bits high), so left action on qubit `q` is a kernel call on `q` and
//! right action is a call on `n + q`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use super::{bce_grad, bce_loss, predicted_label, prob_from_expectation, CircuitSpec};
use crate::datasets::Dataset;
use crate::embedding::embedded_state;
use crate::error::{QasError, Result};
use crate::qsim::kernel::{self, Mat2};
use crate::qsim::{GateOp, Statevector};

/// Widest register evaluated through the operator route; wider circuits fall
/// back to per-sample statevector simulation.
pub const DENSE_ROUTE_MAX_QUBITS: usize = 7;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A dataset with every sample already passed through the embedding.
#[derive(Debug, Clone)]
pub struct EmbeddedSet {
    n_qubits: usize,
    dim: usize,
    states: Vec<Complex64>,
    pub labels: Vec<u8>,
}

impl EmbeddedSet {
    pub fn new(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(QasError::Input("empty dataset".into()));
        }
        let n_qubits = data.n_features;
        let dim = 1usize << n_qubits;
        let mut states = Vec::with_capacity(dim * data.len());
        for x in &data.features {
            states.extend_from_slice(embedded_state(x)?.amplitudes());
        }
        Ok(EmbeddedSet { n_qubits, dim, states, labels: data.labels.clone() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn state(&self, s: usize) -> &[Complex64] {
        &self.states[s * self.dim..(s + 1) * self.dim]
    }

    pub(crate) fn check_circuit(&self, circuit: &CircuitSpec) -> Result<()> {
        if circuit.n_qubits() != self.n_qubits {
            return Err(QasError::Shape(format!(
                "{}-qubit circuit on a {}-feature dataset",
                circuit.n_qubits(),
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// Readout expectations of every sample.
    pub fn expectations(&self, circuit: &CircuitSpec) -> Result<Vec<f64>> {
        self.check_circuit(circuit)?;
        Ok(Forward::expectations_only(circuit, self)?.expectations().to_vec())
    }

    /// Accuracy of the thresholded classifier.
    pub fn accuracy(&self, circuit: &CircuitSpec) -> Result<f64> {
        self.check_circuit(circuit)?;
        Ok(Forward::expectations_only(circuit, self)?.accuracy(&self.labels))
    }

    /// Mean BCE and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, circuit: &CircuitSpec) -> Result<(f64, Vec<f64>)> {
        self.check_circuit(circuit)?;
        let forward = Forward::run(circuit, self)?;
        let grad = forward.gradient(circuit, self)?;
        Ok((forward.loss(&self.labels), grad))
    }
}

pub(crate) enum Forward {
    /// `observables[k]` is the readout observable just before gate `k`;
    /// the last entry is the bare readout `Z`.
    Dense {
        observables: Vec<Vec<Complex64>>,
        expectations: Vec<f64>,
    },
    PerSample {
        expectations: Vec<f64>,
    },
}

impl Forward {
    /// Forward pass that keeps what the gradient needs.
    pub(crate) fn run(circuit: &CircuitSpec, set: &EmbeddedSet) -> Result<Self> {
        Self::evaluate(circuit, set, true)
    }

    pub(crate) fn expectations_only(circuit: &CircuitSpec, set: &EmbeddedSet) -> Result<Self> {
        Self::evaluate(circuit, set, false)
    }

    fn evaluate(circuit: &CircuitSpec, set: &EmbeddedSet, keep_all: bool) -> Result<Self> {
        let gates = circuit.bound_gates();
        let n = set.n_qubits;
        if n <= DENSE_ROUTE_MAX_QUBITS {
            let mut obs = readout_operator(n, circuit.readout());
            let mut observables = Vec::new();
            if keep_all {
                observables.reserve(gates.len() + 1);
                observables.push(obs.clone());
            }
            for gate in gates.iter().rev() {
                heisenberg(&mut obs, n, gate);
                if keep_all {
                    observables.push(obs.clone());
                }
            }
            let expectations = (0..set.len()).map(|s| quadratic_form(&obs, set.state(s))).collect();
            if keep_all {
                observables.reverse();
            } else {
                observables.push(obs);
            }
            Ok(Forward::Dense { observables, expectations })
        } else {
            let expectations =
                (0..set.len()).map(|s| simulate(set.state(s), &gates, circuit.readout())).collect::<Result<_>>()?;
            Ok(Forward::PerSample { expectations })
        }
    }

    pub(crate) fn expectations(&self) -> &[f64] {
        match self {
            Forward::Dense { expectations, .. } | Forward::PerSample { expectations } => expectations,
        }
    }

    pub(crate) fn accuracy(&self, labels: &[u8]) -> f64 {
        let correct = self
            .expectations()
            .iter()
            .zip(labels)
            .filter(|(&e, &y)| predicted_label(prob_from_expectation(e)) == y)
            .count();
        correct as f64 / labels.len() as f64
    }

    pub(crate) fn loss(&self, labels: &[u8]) -> f64 {
        let total: f64 =
            self.expectations().iter().zip(labels).map(|(&e, &y)| bce_loss(y, prob_from_expectation(e))).sum();
        total / labels.len() as f64
    }

    pub(crate) fn gradient(&self, circuit: &CircuitSpec, set: &EmbeddedSet) -> Result<Vec<f64>> {
        let n_samples = set.len() as f64;
        // d(mean loss)/d<Z>_s = L'(yhat_s) * 1/2 / N
        let weights: Vec<f64> = self
            .expectations()
            .iter()
            .zip(&set.labels)
            .map(|(&e, &y)| bce_grad(y, prob_from_expectation(e)) * 0.5 / n_samples)
            .collect();
        let gates = circuit.bound_gates();
        let mut grad = vec![0.0; circuit.n_params()];
        match self {
            Forward::Dense { observables, .. } => {
                if observables.len() != gates.len() + 1 {
                    return Err(QasError::Usage("forward pass did not keep observables".into()));
                }
                let n = set.n_qubits;
                let mut rho = weighted_mixture(set, &weights);
                for (k, gate) in gates.iter().enumerate() {
                    if let (GateOp::Rot { angle, .. }, super::GateTemplate::Rot { param, .. }) =
                        (gate, circuit.gates()[k])
                    {
                        let after = &observables[k + 1];
                        let shifted = |delta: f64| {
                            let mut r = rho.clone();
                            schrodinger(&mut r, n, &gate.with_angle(angle + delta));
                            trace_product(after, &r)
                        };
                        let plus = shifted(FRAC_PI_2);
                        let minus = shifted(-FRAC_PI_2);
                        grad[param] = (plus - minus) / 2.0;
                    }
                    schrodinger(&mut rho, n, gate);
                }
            }
            Forward::PerSample { .. } => {
                let mut shifted_params = circuit.params().to_vec();
                for (s, &w) in weights.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    for j in 0..grad.len() {
                        let theta = shifted_params[j];
                        shifted_params[j] = theta + FRAC_PI_2;
                        let plus = simulate(set.state(s), &circuit.bind(&shifted_params), circuit.readout())?;
                        shifted_params[j] = theta - FRAC_PI_2;
                        let minus = simulate(set.state(s), &circuit.bind(&shifted_params), circuit.readout())?;
                        shifted_params[j] = theta;
                        grad[j] += w * (plus - minus) / 2.0;
                    }
                }
            }
        }
        Ok(grad)
    }
}

fn simulate(initial: &[Complex64], gates: &[GateOp], readout: usize) -> Result<f64> {
    let mut state = Statevector::from_amplitudes(initial.to_vec())?;
    state.apply_circuit(gates)?;
    state.expectation_z(readout)
}

fn gate_matrix(gate: &GateOp) -> Option<(usize, Mat2)> {
    match *gate {
        GateOp::Rot { axis, qubit, angle } => Some((qubit, kernel::rotation(axis, angle))),
        GateOp::Cnot { .. } => None,
    }
}

/// `O <- U^dagger O U`
fn heisenberg(op: &mut [Complex64], n: usize, gate: &GateOp) {
    match gate_matrix(gate) {
        Some((q, u)) => {
            kernel::apply_1q(op, 2 * n, q, &kernel::adjoint(&u));
            kernel::apply_1q(op, 2 * n, n + q, &kernel::transpose(&u));
        }
        None => cnot_both_sides(op, n, gate),
    }
}

/// `rho <- U rho U^dagger`
fn schrodinger(rho: &mut [Complex64], n: usize, gate: &GateOp) {
    match gate_matrix(gate) {
        Some((q, u)) => {
            kernel::apply_1q(rho, 2 * n, q, &u);
            kernel::apply_1q(rho, 2 * n, n + q, &kernel::conj(&u));
        }
        None => cnot_both_sides(rho, n, gate),
    }
}

fn cnot_both_sides(op: &mut [Complex64], n: usize, gate: &GateOp) {
    if let GateOp::Cnot { control, target } = *gate {
        kernel::apply_cnot(op, 2 * n, control, target);
        kernel::apply_cnot(op, 2 * n, n + control, n + target);
    }
}

fn readout_operator(n: usize, readout: usize) -> Vec<Complex64> {
    let dim = 1usize << n;
    let bit = 1usize << (n - 1 - readout);
    let mut op = vec![ZERO; dim * dim];
    for i in 0..dim {
        op[i * dim + i] = Complex64::new(if i & bit == 0 { 1.0 } else { -1.0 }, 0.0);
    }
    op
}

/// `Re <psi| O |psi>`
fn quadratic_form(op: &[Complex64], psi: &[Complex64]) -> f64 {
    let dim = psi.len();
    op.chunks_exact(dim)
        .zip(psi)
        .map(|(row, a)| {
            let row_psi: Complex64 = row.iter().zip(psi).map(|(o, b)| o * b).sum();
            (a.conj() * row_psi).re
        })
        .sum()
}

/// `Re tr(O rho)` for Hermitian `O` and `rho`.
fn trace_product(op: &[Complex64], rho: &[Complex64]) -> f64 {
    op.iter().zip(rho).map(|(o, r)| o.re * r.re + o.im * r.im).sum()
}

fn weighted_mixture(set: &EmbeddedSet, weights: &[f64]) -> Vec<Complex64> {
    let dim = set.dim;
    let mut rho = vec![ZERO; dim * dim];
    for (s, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let psi = set.state(s);
        for (i, row) in rho.chunks_exact_mut(dim).enumerate() {
            let a = psi[i] * w;
            for (r, b) in row.iter_mut().zip(psi) {
                *r += a * b.conj();
            }
        }
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::make_classification;
    use crate::qsim::Axis;
    use crate::vqc::{param_shift_grad, predict_prob};

    fn sample_circuit(n: usize) -> CircuitSpec {
        let mut c = CircuitSpec::new(n).unwrap();
        c.push_rotation(Axis::Y, 0, 0.3).unwrap();
        c.push_cnot(1, 0).unwrap();
        c.push_rotation(Axis::X, 1, -0.8).unwrap();
        c.push_rotation(Axis::Z, 0, 1.2).unwrap();
        c.push_cnot(0, n - 1).unwrap();
        c.push_rotation(Axis::Y, n - 1, 0.45).unwrap();
        c.push_rotation(Axis::Y, 0, -0.2).unwrap();
        c
    }

    #[test]
    fn operator_route_matches_statevector() {
        let data = make_classification(24, 3, 2, 1.0, 5).unwrap();
        let c = sample_circuit(3);
        let set = EmbeddedSet::new(&data).unwrap();
        let fast = set.expectations(&c).unwrap();
        for (x, e) in data.features.iter().zip(&fast) {
            let p = predict_prob(&c, x).unwrap();
            assert!((prob_from_expectation(*e) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn batched_gradient_matches_per_sample_shift() {
        let data = make_classification(16, 3, 3, 0.8, 6).unwrap();
        let c = sample_circuit(3);
        let set = EmbeddedSet::new(&data).unwrap();
        let (_, fast) = set.loss_and_gradient(&c).unwrap();
        let slow = param_shift_grad(&c, &data).unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12, "{fast:?} vs {slow:?}");
        }
    }

    #[test]
    fn wide_register_falls_back_to_statevector() {
        let n = DENSE_ROUTE_MAX_QUBITS + 1;
        let data = make_classification(6, n, 2, 1.0, 7).unwrap();
        let c = sample_circuit(n);
        let set = EmbeddedSet::new(&data).unwrap();
        let (_, fast) = set.loss_and_gradient(&c).unwrap();
        let slow = param_shift_grad(&c, &data).unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
