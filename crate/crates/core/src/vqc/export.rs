//! Plain-text circuit format, one gate per line after a header:
//!
//! ```text
//! # n_qubits=4 readout=0
//! RY 2 0.351700
//! CNOT 2 0
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::{CircuitSpec, GateTemplate};
use crate::error::{QasError, Result};
use crate::qsim::Axis;

pub fn circuit_to_text(circuit: &CircuitSpec) -> String {
    let mut out = format!("# n_qubits={} readout={}\n", circuit.n_qubits(), circuit.readout());
    for gate in circuit.gates() {
        let _ = match *gate {
            GateTemplate::Rot { axis, qubit, param } => {
                writeln!(out, "R{} {qubit} {:.6}", axis.symbol(), circuit.params()[param])
            }
            GateTemplate::Cnot { control, target } => writeln!(out, "CNOT {control} {target}"),
        };
    }
    out
}

pub fn circuit_from_text(text: &str) -> Result<CircuitSpec> {
    let err = |line: usize, msg: String| QasError::Input(format!("circuit line {line}: {msg}"));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let mut n_qubits = None;
    let mut readout = None;
    let fields =
        header.trim().strip_prefix('#').ok_or_else(|| err(1, format!("header must start with '#': {header:?}")))?;
    for field in fields.split_whitespace() {
        let (key, value) = field.split_once('=').ok_or_else(|| err(1, format!("bad header field {field:?}")))?;
        let value: usize = value.parse().map_err(|_| err(1, format!("bad value in {field:?}")))?;
        match key {
            "n_qubits" => n_qubits = Some(value),
            "readout" => readout = Some(value),
            _ => return Err(err(1, format!("unknown header key {key:?}"))),
        }
    }
    let n_qubits = n_qubits.ok_or_else(|| err(1, "header lacks n_qubits".into()))?;
    let mut circuit = CircuitSpec::with_readout(n_qubits, readout.unwrap_or(0))?;

    for (i, line) in lines {
        let lineno = i + 1;
        let parts: Vec<&str> = line.split_whitespace().collect();
        let index = |s: &str| s.parse::<usize>().map_err(|_| err(lineno, format!("bad qubit {s:?}")));
        match parts.as_slice() {
            ["CNOT", c, t] => circuit.push_cnot(index(c)?, index(t)?)?,
            [kind, q, angle] => {
                let axis = match *kind {
                    "RX" => Axis::X,
                    "RY" => Axis::Y,
                    "RZ" => Axis::Z,
                    other => return Err(err(lineno, format!("unknown gate {other:?}"))),
                };
                let angle: f64 = angle.parse().map_err(|_| err(lineno, format!("bad angle {angle:?}")))?;
                circuit.push_rotation(axis, index(q)?, angle)?;
            }
            _ => return Err(err(lineno, format!("malformed gate line {line:?}"))),
        }
    }
    Ok(circuit)
}

pub fn write_circuit(circuit: &CircuitSpec, path: &Path) -> Result<()> {
    std::fs::write(path, circuit_to_text(circuit)).map_err(|e| QasError::io(path, e))
}

pub fn read_circuit(path: &Path) -> Result<CircuitSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| QasError::io(path, e))?;
    circuit_from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_text_layout() {
        let mut c = CircuitSpec::new(4).unwrap();
        c.push_rotation(Axis::Y, 2, 0.3517).unwrap();
        c.push_cnot(2, 0).unwrap();
        c.push_cnot(1, 2).unwrap();
        assert_eq!(circuit_to_text(&c), "# n_qubits=4 readout=0\nRY 2 0.351700\nCNOT 2 0\nCNOT 1 2\n");
    }

    #[test]
    fn reload_keeps_structure_and_rounded_angles() {
        let mut c = CircuitSpec::with_readout(3, 1).unwrap();
        c.push_rotation(Axis::X, 0, -1.234_567_89).unwrap();
        c.push_cnot(0, 2).unwrap();
        c.push_rotation(Axis::Z, 2, 0.5).unwrap();
        let back = circuit_from_text(&circuit_to_text(&c)).unwrap();
        assert_eq!(back.gates(), c.gates());
        assert_eq!(back.readout(), 1);
        assert!((back.params()[0] - c.params()[0]).abs() <= 5e-7);
    }

    #[test]
    fn malformed_inputs() {
        assert!(circuit_from_text("").is_err());
        assert!(circuit_from_text("n_qubits=2\n").is_err());
        assert!(circuit_from_text("# n_qubits=2\nRW 0 0.1\n").is_err());
        assert!(circuit_from_text("# n_qubits=2\nCNOT 0 0\n").is_err());
        assert!(circuit_from_text("# n_qubits=2\nRX 5 0.1\n").is_err());
        assert!(circuit_from_text("# n_qubits=2\nRX 0\n").is_err());
    }
}
