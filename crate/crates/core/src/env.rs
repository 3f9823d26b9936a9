//! The gate-placement environment.
//!
//! Each step appends one gate chosen from the [`ActionTable`], retrains the
//! classifier (warm-started, new rotations start at angle 0) and rewards the
//! resulting test accuracy. Observations are the flattened `L x 4` state
//! matrix followed by the current test accuracy.
//!
//! Row coding, with `n` the qubit count as sentinel:
//!
//! | gate              | row                              |
//! |-------------------|----------------------------------|
//! | `CNOT(c, t)`      | `[c, t, n, 0]`                   |
//! | `R_axis(q)`       | `[n, 0, q, axis]` (X=1, Y=2, Z=3) |
//! | unused            | `[0, 0, 0, 0]`                   |

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{QasError, Result};
use crate::qsim::Axis;
use crate::vqc::{CircuitSpec, ClassifierTrainer, EmbeddedSet, GateTemplate, TrainOutcome};

/// An abstract gate choice; rotation angles are left to the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Rotation { qubit: usize, axis: Axis },
    Cnot { control: usize, target: usize },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Rotation { qubit, axis } => write!(f, "R{}(q{qubit})", axis.symbol()),
            Action::Cnot { control, target } => write!(f, "CNOT(q{control}->q{target})"),
        }
    }
}

fn axis_code(axis: Axis) -> usize {
    match axis {
        Axis::X => 1,
        Axis::Y => 2,
        Axis::Z => 3,
    }
}

/// Encode an action as a state-matrix row.
pub fn encode_gate_row(action: Action, n_qubits: usize) -> [usize; 4] {
    match action {
        Action::Rotation { qubit, axis } => [n_qubits, 0, qubit, axis_code(axis)],
        Action::Cnot { control, target } => [control, target, n_qubits, 0],
    }
}

/// Inverse of [`encode_gate_row`]; rejects all-zero and malformed rows.
pub fn decode_gate_row(row: [usize; 4], n_qubits: usize) -> Result<Action> {
    let bad = || QasError::Input(format!("malformed state row {row:?} for {n_qubits} qubits"));
    match row {
        [c, 0, q, code] if c == n_qubits && q < n_qubits => {
            let axis = match code {
                1 => Axis::X,
                2 => Axis::Y,
                3 => Axis::Z,
                _ => return Err(bad()),
            };
            Ok(Action::Rotation { qubit: q, axis })
        }
        [c, t, s, 0] if s == n_qubits && c < n_qubits && t < n_qubits && c != t => {
            Ok(Action::Cnot { control: c, target: t })
        }
        _ => Err(bad()),
    }
}

/// All rotations (qubit-major, axis-minor) followed by CNOTs over every
/// ordered pair (control-major).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionTable {
    n_qubits: usize,
    entries: Vec<Action>,
}

impl ActionTable {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits < 2 {
            return Err(QasError::Config(format!("action table needs >= 2 qubits, got {n_qubits}")));
        }
        let rotations =
            (0..n_qubits).flat_map(|qubit| Axis::ALL.into_iter().map(move |axis| Action::Rotation { qubit, axis }));
        let cnots = (0..n_qubits).flat_map(|control| {
            (0..n_qubits).filter(move |&t| t != control).map(move |target| Action::Cnot { control, target })
        });
        Ok(ActionTable { n_qubits, entries: rotations.chain(cnots).collect() })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn entries(&self) -> &[Action] {
        &self.entries
    }

    pub fn decode(&self, index: usize) -> Result<Action> {
        self.entries
            .get(index)
            .copied()
            .ok_or_else(|| QasError::Index(format!("action {index} out of range for {} actions", self.entries.len())))
    }

    pub fn index_of(&self, action: Action) -> Option<usize> {
        self.entries.iter().position(|&a| a == action)
    }
}

pub fn build_action_table(n_qubits: usize) -> Result<ActionTable> {
    ActionTable::new(n_qubits)
}

/// The circuit as the agent sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix {
    n_qubits: usize,
    rows: Vec<[usize; 4]>,
    filled: usize,
    pub appended_accuracy: f64,
}

impl StateMatrix {
    pub fn new(n_qubits: usize, max_gates: usize) -> Self {
        StateMatrix { n_qubits, rows: vec![[0; 4]; max_gates], filled: 0, appended_accuracy: 0.0 }
    }

    pub fn rows(&self) -> &[[usize; 4]] {
        &self.rows
    }

    pub fn filled(&self) -> usize {
        self.filled
    }

    pub fn push(&mut self, action: Action) -> Result<()> {
        if self.filled == self.rows.len() {
            return Err(QasError::Usage("state matrix is full".into()));
        }
        self.rows[self.filled] = encode_gate_row(action, self.n_qubits);
        self.filled += 1;
        Ok(())
    }

    /// Actions of the filled prefix.
    pub fn actions(&self) -> Result<Vec<Action>> {
        self.rows[..self.filled].iter().map(|&r| decode_gate_row(r, self.n_qubits)).collect()
    }

    /// Flattened rows followed by the appended accuracy.
    pub fn observation(&self) -> Vec<f64> {
        let mut obs: Vec<f64> = self.rows.iter().flatten().map(|&v| v as f64).collect();
        obs.push(self.appended_accuracy);
        obs
    }
}

/// Reward for the state reached after placing gate `l` of `max_gates`.
///
/// Success before the budget runs out pays `0.2 (y_l / y_target) (L - l)`;
/// missing the target at `l = L` costs `0.2 ((y_target - y_l) / y_target) l`;
/// anything else earns the clipped relative improvement minus `0.01 l`.
pub fn compute_reward(y_l: f64, y_prev: f64, y_target: f64, l: usize, max_gates: usize) -> f64 {
    let (lf, big_l) = (l as f64, max_gates as f64);
    if y_l >= y_target && l < max_gates {
        0.2 * (y_l / y_target) * (big_l - lf)
    } else if y_l < y_target && l == max_gates {
        -0.2 * ((y_target - y_l) / y_target) * lf
    } else {
        ((y_l - y_prev) / (y_prev + 1e-6) - 0.01 * lf).clamp(-1.5, 1.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub accuracy: f64,
    pub train_accuracy: f64,
    pub gate_count: usize,
    pub y_target: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub n_qubits: usize,
    pub max_gates: usize,
    pub y_target: f64,
    pub trainer: ClassifierTrainer,
}

/// One search episode at a time over a fixed train/test split.
pub struct QasEnv {
    config: EnvConfig,
    table: ActionTable,
    train: EmbeddedSet,
    test: EmbeddedSet,
    bare_accuracy: f64,
    circuit: CircuitSpec,
    matrix: StateMatrix,
    y_prev: f64,
    done: bool,
    started: bool,
}

impl QasEnv {
    pub fn new(config: EnvConfig, train: &Dataset, test: &Dataset) -> Result<Self> {
        if config.max_gates == 0 {
            return Err(QasError::Config("max_gates must be >= 1".into()));
        }
        if !(config.y_target > 0.0 && config.y_target <= 1.0) {
            return Err(QasError::Config(format!("y_target must be in (0, 1], got {}", config.y_target)));
        }
        for (name, d) in [("train", train), ("test", test)] {
            if d.n_features != config.n_qubits {
                return Err(QasError::Shape(format!(
                    "{name} set has {} features for {} qubits",
                    d.n_features, config.n_qubits
                )));
            }
        }
        let table = ActionTable::new(config.n_qubits)?;
        let train = EmbeddedSet::new(train)?;
        let test = EmbeddedSet::new(test)?;
        let circuit = CircuitSpec::new(config.n_qubits)?;
        let bare_accuracy = test.accuracy(&circuit)?;
        Ok(QasEnv {
            matrix: StateMatrix::new(config.n_qubits, config.max_gates),
            config,
            table,
            train,
            test,
            bare_accuracy,
            circuit,
            y_prev: bare_accuracy,
            done: true,
            started: false,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn action_table(&self) -> &ActionTable {
        &self.table
    }

    pub fn observation_len(&self) -> usize {
        4 * self.config.max_gates + 1
    }

    pub fn circuit(&self) -> &CircuitSpec {
        &self.circuit
    }

    pub fn state_matrix(&self) -> &StateMatrix {
        &self.matrix
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn y_target(&self) -> f64 {
        self.config.y_target
    }

    /// Takes effect from the next step; used by the adaptive scheduler.
    pub fn set_y_target(&mut self, y_target: f64) {
        self.config.y_target = y_target;
    }

    /// Test accuracy of the circuit with no variational gates.
    pub fn bare_accuracy(&self) -> f64 {
        self.bare_accuracy
    }

    pub fn reset(&mut self) -> Vec<f64> {
        self.circuit = CircuitSpec::new(self.config.n_qubits).expect("validated at construction");
        self.matrix = StateMatrix::new(self.config.n_qubits, self.config.max_gates);
        self.matrix.appended_accuracy = self.bare_accuracy;
        self.y_prev = self.bare_accuracy;
        self.done = false;
        self.started = true;
        self.matrix.observation()
    }

    pub fn step(&mut self, action_index: usize) -> Result<StepResult> {
        if !self.started {
            return Err(QasError::Usage("step called before reset".into()));
        }
        if self.done {
            return Err(QasError::Usage("step called on a finished episode".into()));
        }
        let action = self.table.decode(action_index)?;
        match action {
            Action::Rotation { qubit, axis } => {
                self.circuit.push_rotation(axis, qubit, 0.0)?;
            }
            Action::Cnot { control, target } => self.circuit.push_cnot(control, target)?,
        }
        self.matrix.push(action)?;
        let l = self.matrix.filled();

        let TrainOutcome { train_accuracy, test_accuracy, epochs_run, .. } =
            self.config.trainer.train(&mut self.circuit, &self.train, &self.test, self.config.y_target)?;
        let y_l = test_accuracy;
        self.matrix.appended_accuracy = y_l;
        let reward = compute_reward(y_l, self.y_prev, self.config.y_target, l, self.config.max_gates);
        self.y_prev = y_l;
        self.done = y_l >= self.config.y_target || l == self.config.max_gates;
        Ok(StepResult {
            observation: self.matrix.observation(),
            reward,
            done: self.done,
            info: StepInfo { accuracy: y_l, train_accuracy, gate_count: l, y_target: self.config.y_target, epochs_run },
        })
    }
}

/// Per-step trace rows: `episode,step,action_index,y_l,reward,done`.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "episode,step,action_index,y_l,reward,done")?;
        Ok(TraceWriter { out })
    }

    pub fn record(&mut self, episode: usize, step: usize, action: usize, result: &StepResult) -> std::io::Result<()> {
        writeln!(
            self.out,
            "{episode},{step},{action},{},{},{}",
            result.info.accuracy,
            result.reward,
            u8::from(result.done)
        )
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Structure of the circuit implied by a list of actions.
pub fn circuit_structure(actions: &[Action]) -> Vec<GateTemplate> {
    let mut param = 0;
    actions
        .iter()
        .map(|&a| match a {
            Action::Rotation { qubit, axis } => {
                param += 1;
                GateTemplate::Rot { axis, qubit, param: param - 1 }
            }
            Action::Cnot { control, target } => GateTemplate::Cnot { control, target },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_sizes_and_order() {
        assert_eq!(ActionTable::new(4).unwrap().len(), 24);
        let t2 = ActionTable::new(2).unwrap();
        assert_eq!(t2.len(), 8);
        assert_eq!(t2.decode(0).unwrap(), Action::Rotation { qubit: 0, axis: Axis::X });
        assert_eq!(t2.decode(6).unwrap(), Action::Cnot { control: 0, target: 1 });
        assert_eq!(t2.decode(7).unwrap(), Action::Cnot { control: 1, target: 0 });
        assert!(t2.decode(8).is_err());
        assert!(ActionTable::new(1).is_err());
    }

    #[test]
    fn rows_match_reference_example() {
        assert_eq!(encode_gate_row(Action::Rotation { qubit: 2, axis: Axis::Y }, 4), [4, 0, 2, 2]);
        assert_eq!(encode_gate_row(Action::Cnot { control: 2, target: 0 }, 4), [2, 0, 4, 0]);
        assert_eq!(encode_gate_row(Action::Cnot { control: 1, target: 2 }, 4), [1, 2, 4, 0]);
    }

    #[test]
    fn round_trip_every_action() {
        for n in 2..=5 {
            let table = ActionTable::new(n).unwrap();
            for &a in table.entries() {
                assert_eq!(decode_gate_row(encode_gate_row(a, n), n).unwrap(), a);
            }
        }
    }

    #[test]
    fn malformed_rows_rejected() {
        for row in [[0, 0, 0, 0], [4, 0, 2, 0], [4, 0, 4, 1], [1, 1, 4, 0], [1, 2, 3, 0], [4, 1, 2, 2]] {
            assert!(decode_gate_row(row, 4).is_err(), "{row:?}");
        }
    }

    #[test]
    fn reward_examples() {
        assert!((compute_reward(0.85, 0.80, 0.85, 5, 20) - 3.0).abs() < 1e-9);
        assert!((compute_reward(0.60, 0.55, 0.85, 20, 20) + 0.2 * (0.25 / 0.85) * 20.0).abs() < 1e-9);
        assert!((compute_reward(0.50, 0.50, 0.85, 3, 20) + 0.03).abs() < 1e-9);
        assert_eq!(compute_reward(0.9, 0.1, 0.95, 1, 20), 1.5);
        let r = compute_reward(0.0, 0.9, 0.95, 1, 20);
        assert!((r - (-0.9 / 0.900001 - 0.01)).abs() < 1e-12);
        assert_eq!(compute_reward(0.0, 0.9, 0.95, 60, 100), -1.5);
    }
}
