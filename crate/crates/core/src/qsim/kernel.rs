//! In-place amplitude kernels shared by the statevector and the batched
//! density-matrix evaluator. Qubit 0 is the most significant bit of the
//! basis index.

use num_complex::Complex64;

pub type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
fn stride(n_qubits: usize, qubit: usize) -> usize {
    1usize << (n_qubits - 1 - qubit)
}

/// Apply a single-qubit matrix to `qubit` of an `n_qubits` register.
pub fn apply_1q(amps: &mut [Complex64], n_qubits: usize, qubit: usize, m: &Mat2) {
    debug_assert_eq!(amps.len(), 1 << n_qubits);
    let s = stride(n_qubits, qubit);
    let [[m00, m01], [m10, m11]] = *m;
    for block in amps.chunks_exact_mut(2 * s) {
        let (lo, hi) = block.split_at_mut(s);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x, y) = (*a, *b);
            *a = m00 * x + m01 * y;
            *b = m10 * x + m11 * y;
        }
    }
}

/// Apply a diagonal single-qubit matrix `diag(d0, d1)`.
pub fn apply_diag(amps: &mut [Complex64], n_qubits: usize, qubit: usize, d0: Complex64, d1: Complex64) {
    let s = stride(n_qubits, qubit);
    for block in amps.chunks_exact_mut(2 * s) {
        let (lo, hi) = block.split_at_mut(s);
        lo.iter_mut().for_each(|a| *a *= d0);
        hi.iter_mut().for_each(|b| *b *= d1);
    }
}

/// CNOT as a permutation: swap amplitudes of basis states that differ only in
/// the target bit, restricted to those with the control bit set.
pub fn apply_cnot(amps: &mut [Complex64], n_qubits: usize, control: usize, target: usize) {
    let cbit = stride(n_qubits, control);
    let tbit = stride(n_qubits, target);
    for idx in 0..amps.len() {
        if idx & cbit != 0 && idx & tbit == 0 {
            amps.swap(idx, idx | tbit);
        }
    }
}

/// `exp(-i θ A / 2)` for `A` one of the Pauli matrices.
pub fn rotation(axis: super::Axis, angle: f64) -> Mat2 {
    let (s, c) = (angle / 2.0).sin_cos();
    let c = Complex64::new(c, 0.0);
    match axis {
        super::Axis::X => {
            let mis = Complex64::new(0.0, -s);
            [[c, mis], [mis, c]]
        }
        super::Axis::Y => {
            let s = Complex64::new(s, 0.0);
            [[c, -s], [s, c]]
        }
        super::Axis::Z => [[Complex64::new(c.re, -s), ZERO], [ZERO, Complex64::new(c.re, s)]],
    }
}

pub fn adjoint(m: &Mat2) -> Mat2 {
    [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]]
}

pub fn conj(m: &Mat2) -> Mat2 {
    [[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]]
}

pub fn transpose(m: &Mat2) -> Mat2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

/// `<Z_qubit>` of a normalized register.
pub fn expectation_z(amps: &[Complex64], n_qubits: usize, qubit: usize) -> f64 {
    let bit = stride(n_qubits, qubit);
    amps.iter()
        .enumerate()
        .map(|(idx, a)| {
            let p = a.norm_sqr();
            if idx & bit == 0 {
                p
            } else {
                -p
            }
        })
        .sum()
}
