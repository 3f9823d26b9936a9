//! Variational quantum classifier: arctan-embedded input, a trainable gate
//! list, and `yhat = (1 + <Z_readout>) / 2`.

mod batch;
mod export;

pub use batch::{EmbeddedSet, DENSE_ROUTE_MAX_QUBITS};
pub use export::{circuit_from_text, circuit_to_text, read_circuit, write_circuit};

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::embedding::embedded_state;
use crate::error::{QasError, Result};
use crate::optim::{Adam, AdamConfig};
use crate::qsim::{Axis, GateOp, MAX_QUBITS};

/// Lower clamp applied to predictions before taking logs.
pub const LOSS_CLIP: f64 = 1e-7;

/// A variational gate whose rotation angle lives in the parameter array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateTemplate {
    Rot { axis: Axis, qubit: usize, param: usize },
    Cnot { control: usize, target: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    n_qubits: usize,
    gates: Vec<GateTemplate>,
    params: Vec<f64>,
    readout: usize,
}

impl CircuitSpec {
    /// Empty variational circuit reading out qubit 0.
    pub fn new(n_qubits: usize) -> Result<Self> {
        Self::with_readout(n_qubits, 0)
    }

    pub fn with_readout(n_qubits: usize, readout: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QasError::Config(format!("n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}")));
        }
        if readout >= n_qubits {
            return Err(QasError::Index(format!("readout qubit {readout} >= {n_qubits}")));
        }
        Ok(CircuitSpec { n_qubits, gates: Vec::new(), params: Vec::new(), readout })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn readout(&self) -> usize {
        self.readout
    }

    pub fn gates(&self) -> &[GateTemplate] {
        &self.gates
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Append a rotation with its own parameter, initialised to `angle`.
    /// Returns the parameter index.
    pub fn push_rotation(&mut self, axis: Axis, qubit: usize, angle: f64) -> Result<usize> {
        GateOp::Rot { axis, qubit, angle }.validate(self.n_qubits)?;
        let param = self.params.len();
        self.gates.push(GateTemplate::Rot { axis, qubit, param });
        self.params.push(angle);
        Ok(param)
    }

    pub fn push_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        GateOp::cnot(control, target).validate(self.n_qubits)?;
        self.gates.push(GateTemplate::Cnot { control, target });
        Ok(())
    }

    /// Append a concrete gate; a rotation's angle becomes its initial parameter.
    pub fn push_gate(&mut self, gate: GateOp) -> Result<()> {
        match gate {
            GateOp::Rot { axis, qubit, angle } => self.push_rotation(axis, qubit, angle).map(|_| ()),
            GateOp::Cnot { control, target } => self.push_cnot(control, target),
        }
    }

    /// Concrete gates under the current parameters.
    pub fn bound_gates(&self) -> Vec<GateOp> {
        self.bind(&self.params)
    }

    pub(crate) fn bind(&self, params: &[f64]) -> Vec<GateOp> {
        self.gates
            .iter()
            .map(|g| match *g {
                GateTemplate::Rot { axis, qubit, param } => GateOp::Rot { axis, qubit, angle: params[param] },
                GateTemplate::Cnot { control, target } => GateOp::Cnot { control, target },
            })
            .collect()
    }

    fn check_features(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_qubits {
            return Err(QasError::Shape(format!("{} features for a {}-qubit circuit", x.len(), self.n_qubits)));
        }
        Ok(())
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.is_empty() {
            return Err(QasError::Input("empty dataset".into()));
        }
        if data.n_features != self.n_qubits {
            return Err(QasError::Shape(format!(
                "{}-feature dataset for a {}-qubit circuit",
                data.n_features, self.n_qubits
            )));
        }
        Ok(())
    }

    fn readout_expectation(&self, x: &[f64], params: &[f64]) -> Result<f64> {
        let mut state = embedded_state(x)?;
        state.apply_circuit(&self.bind(params))?;
        state.expectation_z(self.readout)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub trained_params: Vec<f64>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub epochs_run: usize,
    pub final_loss: f64,
}

#[inline]
pub(crate) fn prob_from_expectation(e: f64) -> f64 {
    ((1.0 + e) / 2.0).clamp(0.0, 1.0)
}

/// Class 1 when `yhat >= 0.5`.
#[inline]
pub(crate) fn predicted_label(prob: f64) -> u8 {
    u8::from(prob >= 0.5)
}

/// Probability of class 1 for one input.
pub fn predict_prob(circuit: &CircuitSpec, x: &[f64]) -> Result<f64> {
    circuit.check_features(x)?;
    Ok(prob_from_expectation(circuit.readout_expectation(x, circuit.params())?))
}

/// Binary cross-entropy of one prediction, clamped to `[LOSS_CLIP, 1 - LOSS_CLIP]`.
pub fn bce_loss(y_true: u8, y_pred: f64) -> f64 {
    let p = y_pred.clamp(LOSS_CLIP, 1.0 - LOSS_CLIP);
    if y_true == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Mean BCE over a batch.
pub fn bce_mean(labels: &[u8], preds: &[f64]) -> f64 {
    debug_assert_eq!(labels.len(), preds.len());
    labels.iter().zip(preds).map(|(&y, &p)| bce_loss(y, p)).sum::<f64>() / labels.len() as f64
}

/// `d bce / d yhat`; zero where the clamp is active.
pub(crate) fn bce_grad(y_true: u8, y_pred: f64) -> f64 {
    if !(LOSS_CLIP..=1.0 - LOSS_CLIP).contains(&y_pred) {
        return 0.0;
    }
    if y_true == 1 {
        -1.0 / y_pred
    } else {
        1.0 / (1.0 - y_pred)
    }
}

/// Gradient of mean BCE by the parameter-shift rule, one simulation per
/// sample and shift:
/// `dL/dθ_j = mean_s L'(yhat_s) · ½ · (<Z>(θ_j + π/2) − <Z>(θ_j − π/2)) / 2`.
pub fn param_shift_grad(circuit: &CircuitSpec, batch: &Dataset) -> Result<Vec<f64>> {
    circuit.check_dataset(batch)?;
    if circuit.n_params() == 0 {
        return Err(QasError::Input("circuit has no parameters".into()));
    }
    let n = batch.len() as f64;
    let mut grad = vec![0.0; circuit.n_params()];
    let mut shifted = circuit.params().to_vec();
    for (x, &y) in batch.features.iter().zip(&batch.labels) {
        let e = circuit.readout_expectation(x, circuit.params())?;
        let dl = bce_grad(y, prob_from_expectation(e));
        if dl == 0.0 {
            continue;
        }
        for (j, g) in grad.iter_mut().enumerate() {
            let theta = shifted[j];
            shifted[j] = theta + FRAC_PI_2;
            let plus = circuit.readout_expectation(x, &shifted)?;
            shifted[j] = theta - FRAC_PI_2;
            let minus = circuit.readout_expectation(x, &shifted)?;
            shifted[j] = theta;
            *g += dl * 0.5 * (plus - minus) / 2.0 / n;
        }
    }
    Ok(grad)
}

/// Fraction of samples whose thresholded prediction equals the label.
pub fn evaluate_accuracy(circuit: &CircuitSpec, data: &Dataset) -> Result<f64> {
    circuit.check_dataset(data)?;
    let mut correct = 0usize;
    for (x, &y) in data.features.iter().zip(&data.labels) {
        if predicted_label(predict_prob(circuit, x)?) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Full-batch Adam training with early stopping on train accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierTrainer {
    pub max_epochs: usize,
    pub adam: AdamConfig,
}

impl ClassifierTrainer {
    pub fn new(max_epochs: usize) -> Self {
        ClassifierTrainer { max_epochs, adam: AdamConfig::with_lr(0.05) }
    }

    /// Train `circuit` in place, starting from its current parameters.
    ///
    /// Each epoch first evaluates the training set; the loop stops before
    /// stepping once train accuracy reaches `target_acc`, so `epochs_run`
    /// counts optimizer steps actually taken.
    pub fn train(
        &self,
        circuit: &mut CircuitSpec,
        train: &EmbeddedSet,
        test: &EmbeddedSet,
        target_acc: f64,
    ) -> Result<TrainOutcome> {
        if self.max_epochs == 0 {
            return Err(QasError::Config("max_epochs must be >= 1".into()));
        }
        train.check_circuit(circuit)?;
        test.check_circuit(circuit)?;
        let n_params = circuit.n_params();
        let mut adam = Adam::new(self.adam, &[n_params]);
        let mut epochs_run = 0;
        let (train_accuracy, final_loss) = loop {
            let forward = batch::Forward::run(circuit, train)?;
            let accuracy = forward.accuracy(&train.labels);
            let done = n_params == 0 || accuracy >= target_acc || epochs_run == self.max_epochs;
            if done {
                break (accuracy, forward.loss(&train.labels));
            }
            let grad = forward.gradient(circuit, train)?;
            adam.step(&mut [circuit.params_mut()], &[&grad]);
            epochs_run += 1;
        };
        let test_accuracy = batch::Forward::expectations_only(circuit, test)?.accuracy(&test.labels);
        Ok(TrainOutcome {
            trained_params: circuit.params().to_vec(),
            train_accuracy,
            test_accuracy,
            epochs_run,
            final_loss,
        })
    }
}

/// Train with the default classifier optimizer (Adam, lr 0.05).
pub fn train_classifier(
    circuit: &mut CircuitSpec,
    train_set: &Dataset,
    test_set: &Dataset,
    max_epochs: usize,
    target_acc: f64,
) -> Result<TrainOutcome> {
    let train = EmbeddedSet::new(train_set)?;
    let test = EmbeddedSet::new(test_set)?;
    ClassifierTrainer::new(max_epochs).train(circuit, &train, &test, target_acc)
}
