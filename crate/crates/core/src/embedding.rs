//! Arctan angle embedding of classical features.
//!
//! Feature `f_i` becomes `RY(atan f_i)` followed by `RZ(atan f_i^2)` on qubit
//! `i`, qubit-major. Features are used raw; arctan saturates, so callers
//! should feed reasonably scaled data.

use crate::error::{QasError, Result};
use crate::qsim::{GateOp, Statevector};

pub fn embed_features(features: &[f64]) -> Result<Vec<GateOp>> {
    if let Some((i, f)) = features.iter().enumerate().find(|(_, f)| !f.is_finite()) {
        return Err(QasError::Input(format!("feature {i} is not finite ({f})")));
    }
    Ok(features
        .iter()
        .enumerate()
        .flat_map(|(q, &f)| [GateOp::ry(q, f.atan()), GateOp::rz(q, (f * f).atan())])
        .collect())
}

/// `U(x)|0...0>` for a feature vector whose length is the register width.
pub fn embedded_state(features: &[f64]) -> Result<Statevector> {
    let mut state = Statevector::zero(features.len())?;
    state.apply_circuit(&embed_features(features)?)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn zeros_give_zero_angles() {
        let gates = embed_features(&[0.0, 0.0]).unwrap();
        assert_eq!(gates, vec![GateOp::ry(0, 0.0), GateOp::rz(0, 0.0), GateOp::ry(1, 0.0), GateOp::rz(1, 0.0)]);
    }

    #[test]
    fn unit_features() {
        assert_eq!(embed_features(&[1.0]).unwrap(), vec![GateOp::ry(0, FRAC_PI_4), GateOp::rz(0, FRAC_PI_4)]);
        assert_eq!(embed_features(&[-1.0]).unwrap(), vec![GateOp::ry(0, -FRAC_PI_4), GateOp::rz(0, FRAC_PI_4)]);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(embed_features(&[0.0, f64::NAN]), Err(QasError::Input(_))));
        assert!(embed_features(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn angle_ranges() {
        let xs = [-1e5, -3.0, -0.2, 0.0, 0.7, 12.0, 1e5];
        for g in embed_features(&xs).unwrap() {
            match g {
                GateOp::Rot { axis: crate::qsim::Axis::Y, angle, .. } => {
                    assert!(angle > -std::f64::consts::FRAC_PI_2 && angle < std::f64::consts::FRAC_PI_2)
                }
                GateOp::Rot { angle, .. } => {
                    assert!((0.0..std::f64::consts::FRAC_PI_2).contains(&angle))
                }
                _ => unreachable!(),
            }
        }
    }
}
