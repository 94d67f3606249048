//! Dense complex linear algebra, time-ordered propagation and special functions.

pub mod bessel;
pub mod eigen;
pub mod expm;
pub mod lindblad;
pub mod matrix;
pub mod propagate;

pub use bessel::{bessel_j, bessel_j_upto, inverse_j1};
pub use eigen::hermitian_eigenvalues;
pub use expm::{mat_exp, solve};
pub use matrix::{pauli, ComplexMatrix};
pub use propagate::{
    propagate, propagate_observed, propagate_with, Integrator, PropagateOptions, StepPolicy,
    TimeGrid, DEFAULT_STEPS,
};

use crate::error::{GeoError, Result};

/// Phase-insensitive distance between two unitaries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseDistance {
    pub value: f64,
    /// False when `Tr(U†V) = 0`, in which case no phase alignment was applied.
    pub phase_aligned: bool,
}

/// `‖U·e^{iθ} − V‖_max` with `e^{iθ} = Tr(U†V)/|Tr(U†V)|`.
pub fn distance_up_to_phase(u: &ComplexMatrix, v: &ComplexMatrix) -> Result<PhaseDistance> {
    if u.dim() != v.dim() {
        return Err(GeoError::Dimension(format!(
            "distance between {}x{} and {}x{}",
            u.dim(),
            u.dim(),
            v.dim(),
            v.dim()
        )));
    }
    let tr = u.adjoint().matmul(v).trace();
    if tr.norm() < 1e-14 {
        return Ok(PhaseDistance {
            value: (u - v).max_norm(),
            phase_aligned: false,
        });
    }
    let phase = tr / tr.norm();
    Ok(PhaseDistance {
        value: (&u.scale(phase) - v).max_norm(),
        phase_aligned: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;

    #[test]
    fn distance_examples() {
        let u = ComplexMatrix::mat2(
            C64::new(0.6, 0.0),
            C64::new(0.0, 0.8),
            C64::new(0.0, 0.8),
            C64::new(0.6, 0.0),
        );
        assert!(distance_up_to_phase(&u, &u).unwrap().value < 1e-15);
        let shifted = u.scale(C64::from_polar(1.0, std::f64::consts::FRAC_PI_3));
        assert!(distance_up_to_phase(&u, &shifted).unwrap().value < 1e-15);
    }

    #[test]
    fn traceless_overlap_is_flagged() {
        let x_pi = ComplexMatrix::mat2(
            C64::new(0.0, 0.0),
            C64::new(0.0, -1.0),
            C64::new(0.0, -1.0),
            C64::new(0.0, 0.0),
        );
        let d = distance_up_to_phase(&x_pi, &ComplexMatrix::identity(2)).unwrap();
        assert!(!d.phase_aligned);
        // every entry of X_π − I has modulus 1
        assert!((d.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(distance_up_to_phase(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3)).is_err());
    }
}
