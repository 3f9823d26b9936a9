//! Dense statevector simulation for RX/RY/RZ/CNOT circuits.
//!
//! Basis ordering: qubit 0 is the **most significant** bit of the basis
//! index, so on two qubits `|10>` (qubit 0 set) is amplitude index 2.
//! Gates act in place by strided index pairs; no full unitary is ever built.

pub(crate) mod kernel;

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QasError, Result};

/// Hard cap on register width.
pub const MAX_QUBITS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn symbol(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }
}

/// One placed gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateOp {
    Rot { axis: Axis, qubit: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

impl GateOp {
    pub fn rx(qubit: usize, angle: f64) -> Self {
        GateOp::Rot { axis: Axis::X, qubit, angle }
    }

    pub fn ry(qubit: usize, angle: f64) -> Self {
        GateOp::Rot { axis: Axis::Y, qubit, angle }
    }

    pub fn rz(qubit: usize, angle: f64) -> Self {
        GateOp::Rot { axis: Axis::Z, qubit, angle }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        GateOp::Cnot { control, target }
    }

    /// Check qubit indices against a register width.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        match *self {
            GateOp::Rot { qubit, .. } if qubit >= n_qubits => {
                Err(QasError::Index(format!("rotation qubit {qubit} out of range for {n_qubits} qubits")))
            }
            GateOp::Cnot { control, target } => {
                if control >= n_qubits || target >= n_qubits {
                    Err(QasError::Index(format!("cnot({control}, {target}) out of range for {n_qubits} qubits")))
                } else if control == target {
                    Err(QasError::Index(format!("cnot control equals target ({control})")))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Same gate with the rotation angle replaced; CNOTs are returned as is.
    pub fn with_angle(self, angle: f64) -> Self {
        match self {
            GateOp::Rot { axis, qubit, .. } => GateOp::Rot { axis, qubit, angle },
            cnot => cnot,
        }
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateOp::Rot { axis, qubit, angle } => write!(f, "R{}({angle:.6}) q{qubit}", axis.symbol()),
            GateOp::Cnot { control, target } => write!(f, "CNOT q{control}->q{target}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QasError::Config(format!("n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Statevector { n_qubits, amps })
    }

    /// Wrap raw amplitudes. The length must be a power of two within the cap;
    /// normalization is the caller's business.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(QasError::Shape(format!("amplitude count {len} is not 2^n")));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(QasError::Config(format!("{n_qubits} qubits exceeds cap {MAX_QUBITS}")));
        }
        Ok(Statevector { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
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

    pub fn apply_gate(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match *gate {
            GateOp::Rot { axis: Axis::Z, qubit, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                kernel::apply_diag(&mut self.amps, self.n_qubits, qubit, Complex64::new(c, -s), Complex64::new(c, s));
            }
            GateOp::Rot { axis, qubit, angle } => {
                let m = kernel::rotation(axis, angle);
                kernel::apply_1q(&mut self.amps, self.n_qubits, qubit, &m);
            }
            GateOp::Cnot { control, target } => kernel::apply_cnot(&mut self.amps, self.n_qubits, control, target),
        }
        Ok(())
    }

    /// Apply gates left to right. Indices are validated up front, so an
    /// error leaves the state untouched.
    pub fn apply_circuit(&mut self, gates: &[GateOp]) -> Result<()> {
        for g in gates {
            g.validate(self.n_qubits)?;
        }
        for g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    /// Exact `<Z>` on one qubit.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(QasError::Index(format!("qubit {qubit} out of range for {} qubits", self.n_qubits)));
        }
        Ok(kernel::expectation_z(&self.amps, self.n_qubits, qubit))
    }
}

/// Functional form of [`Statevector::apply_gate`].
pub fn apply_gate(state: &Statevector, gate: &GateOp) -> Result<Statevector> {
    let mut out = state.clone();
    out.apply_gate(gate)?;
    Ok(out)
}

/// Functional form of [`Statevector::apply_circuit`].
pub fn apply_circuit(state: &Statevector, gates: &[GateOp]) -> Result<Statevector> {
    let mut out = state.clone();
    out.apply_circuit(gates)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: &[Complex64], b: &[Complex64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn zero_state_shapes() {
        assert_eq!(Statevector::zero(1).unwrap().amplitudes(), &[c(1., 0.), c(0., 0.)]);
        assert_eq!(Statevector::zero(2).unwrap().amplitudes(), &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
        assert!(matches!(Statevector::zero(0), Err(QasError::Config(_))));
        assert!(Statevector::zero(MAX_QUBITS + 1).is_err());
    }

    #[test]
    fn rx_pi_flips_with_phase() {
        let s = apply_gate(&Statevector::zero(1).unwrap(), &GateOp::rx(0, PI)).unwrap();
        assert!(close(s.amplitudes(), &[c(0., 0.), c(0., -1.)], 1e-12));
        assert!((s.expectation_z(0).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn cnot_truth_table() {
        // |10>: qubit 0 set, which is index 2 under the MSB convention.
        let mut amps = vec![c(0., 0.); 4];
        amps[2] = c(1., 0.);
        let s = Statevector::from_amplitudes(amps).unwrap();
        let out = apply_gate(&s, &GateOp::cnot(0, 1)).unwrap();
        assert_eq!(out.amplitudes()[3], c(1., 0.));
        assert_eq!(out.norm_sqr(), 1.0);
    }

    #[test]
    fn ry_half_pi_equator() {
        let s = apply_gate(&Statevector::zero(1).unwrap(), &GateOp::ry(0, FRAC_PI_2)).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(s.amplitudes(), &[c(h, 0.), c(h, 0.)], 1e-12));
        assert!(s.expectation_z(0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let s = Statevector::zero(3).unwrap();
        assert_eq!(apply_circuit(&s, &[]).unwrap(), s);
    }

    #[test]
    fn double_rx_pi_is_minus_identity() {
        let s = Statevector::zero(1).unwrap();
        let out = apply_circuit(&s, &[GateOp::rx(0, PI), GateOp::rx(0, PI)]).unwrap();
        assert!(close(out.amplitudes(), &[c(-1., 0.), c(0., 0.)], 1e-12));
        assert!((out.expectation_z(0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_indices() {
        let mut s = Statevector::zero(2).unwrap();
        assert!(matches!(s.apply_gate(&GateOp::rx(2, 0.1)), Err(QasError::Index(_))));
        assert!(matches!(s.apply_gate(&GateOp::cnot(1, 1)), Err(QasError::Index(_))));
        assert!(matches!(s.apply_gate(&GateOp::cnot(0, 5)), Err(QasError::Index(_))));
        assert!(s.expectation_z(2).is_err());
        let before = s.clone();
        assert!(s.apply_circuit(&[GateOp::ry(0, 1.0), GateOp::rz(9, 1.0)]).is_err());
        assert_eq!(s, before);
    }

    #[test]
    fn zero_state_expectations_are_one() {
        let s = Statevector::zero(5).unwrap();
        for q in 0..5 {
            assert_eq!(s.expectation_z(q).unwrap(), 1.0);
        }
    }
}
