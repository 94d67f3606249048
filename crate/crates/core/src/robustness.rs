//! Systematic-error injection, gate fidelity and sensitivity curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::str::FromStr;

use crate::error::{GeoError, Result};
use crate::numkit::ComplexMatrix;
use crate::pulse::{propagate_schedule, PulseSchedule, SegmentStepping};

/// Systematic control errors, all zero by default.
///
/// * `detuning` δ: `Δ → Δ + δ Ω_m`
/// * `amplitude` ε: `Ω → (1 + ε) Ω`
/// * `zz` ζ: crosstalk `ζ σz⊗σz` (angular frequency, two-qubit models only)
/// * `detuning_2q` δ′: `Δ′ → Δ′ + δ′ g′`
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub detuning: f64,
    pub amplitude: f64,
    pub zz: f64,
    pub detuning_2q: f64,
}

impl ErrorModel {
    pub fn detuning(delta: f64) -> Self {
        Self {
            detuning: delta,
            ..Self::default()
        }
    }

    pub fn amplitude(eps: f64) -> Self {
        Self {
            amplitude: eps,
            ..Self::default()
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }
}

/// Which error a sensitivity sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorKind {
    Detuning,
    Amplitude,
    /// ZZ crosstalk; the sweep value is `ζ / Ω_m`.
    Zz,
}

impl ErrorKind {
    /// Error model for one sweep value. Two-qubit sweeps map `Detuning` onto δ′.
    pub fn model(self, value: f64, omega_m: f64) -> ErrorModel {
        match self {
            ErrorKind::Detuning => ErrorModel::detuning(value),
            ErrorKind::Amplitude => ErrorModel::amplitude(value),
            ErrorKind::Zz => ErrorModel {
                zz: value * omega_m,
                ..ErrorModel::default()
            },
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ErrorKind::Detuning => "detuning",
            ErrorKind::Amplitude => "amplitude",
            ErrorKind::Zz => "zz",
        }
    }
}

impl FromStr for ErrorKind {
    type Err = GeoError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "detuning" | "delta" => Ok(ErrorKind::Detuning),
            "amplitude" | "epsilon" => Ok(ErrorKind::Amplitude),
            "zz" | "crosstalk" => Ok(ErrorKind::Zz),
            other => Err(GeoError::Lookup(format!("error kind '{other}'"))),
        }
    }
}

/// Trace-overlap convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FidelityKind {
    /// `|Tr(U†U_e)| / d`, insensitive to global phase.
    #[default]
    Modulus,
    /// `Re Tr(U†U_e) / d`, the literal trace ratio.
    RealPart,
}

/// `|Tr(U†U_e)| / Tr(U†U)`; `U_target` must be unitary.
pub fn gate_fidelity(target: &ComplexMatrix, actual: &ComplexMatrix) -> Result<f64> {
    gate_fidelity_with(target, actual, FidelityKind::Modulus)
}

pub fn gate_fidelity_with(
    target: &ComplexMatrix,
    actual: &ComplexMatrix,
    kind: FidelityKind,
) -> Result<f64> {
    if target.dim() != actual.dim() {
        return Err(GeoError::Dimension(format!(
            "fidelity between {}x{} target and {}x{} gate",
            target.dim(),
            target.dim(),
            actual.dim(),
            actual.dim()
        )));
    }
    let overlap = target.adjoint().matmul(actual).trace();
    let norm = target.adjoint().matmul(target).trace().re;
    Ok(match kind {
        FidelityKind::Modulus => overlap.norm() / norm,
        FidelityKind::RealPart => overlap.re / norm,
    })
}

/// `1 − F_U` sampled over an error grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub gate_name: String,
    pub delta_grid: Vec<f64>,
    pub infidelity: Vec<f64>,
}

impl SensitivityCurve {
    pub fn value_at(&self, delta: f64) -> Option<f64> {
        self.delta_grid
            .iter()
            .position(|d| (d - delta).abs() < 1e-12)
            .map(|i| self.infidelity[i])
    }

    pub fn max(&self) -> f64 {
        self.infidelity.iter().copied().fold(0.0, f64::max)
    }
}

/// `n` points evenly spaced over `[−max, max]`.
pub fn symmetric_grid(max: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|i| {
            // center and ends are snapped onto exact values
            if 2 * i + 1 == n {
                0.0
            } else if i == 0 {
                -max
            } else if i == n - 1 {
                max
            } else {
                -max + 2.0 * max * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// 41 points over `[−0.1, 0.1]`.
pub fn default_delta_grid() -> Vec<f64> {
    symmetric_grid(0.1, 41)
}

/// Evaluates `infidelity(value)` over `grid` in parallel; results keep grid order.
pub fn sensitivity_curve_with<F>(name: &str, grid: &[f64], infidelity: F) -> Result<SensitivityCurve>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let vals: Result<Vec<f64>> = grid.par_iter().map(|&v| infidelity(v)).collect();
    Ok(SensitivityCurve {
        gate_name: name.to_string(),
        delta_grid: grid.to_vec(),
        infidelity: vals?,
    })
}

/// A schedule together with the two-level gate it should realize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateProgram {
    pub name: String,
    pub schedule: PulseSchedule,
    pub target: ComplexMatrix,
}

/// Propagates the error-injected schedule at each grid value and records `1 − F_U`.
pub fn sensitivity_curve(
    program: &GateProgram,
    kind: ErrorKind,
    grid: &[f64],
    stepping: &SegmentStepping,
    fidelity: FidelityKind,
) -> Result<SensitivityCurve> {
    sensitivity_curve_with(&program.name, grid, |v| {
        let err = kind.model(v, program.schedule.omega_max);
        let u = propagate_schedule(&program.schedule, &err, stepping)?;
        Ok(1.0 - gate_fidelity_with(&program.target, &u, fidelity)?)
    })
}

/// Pointwise comparison of curve `a` against curve `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    /// `a[i] <= b[i]` (within the tie tolerance).
    pub pointwise_le: Vec<bool>,
    pub ties: Vec<bool>,
    /// `a` never exceeds `b`.
    pub dominates: bool,
    /// `a` never exceeds `b` and is strictly below somewhere.
    pub strictly_dominates: bool,
    /// Largest `a[i] / b[i]` over points with `b[i] > 0`.
    pub max_ratio: f64,
    /// Grid positions where `a − b` changes sign (linear interpolation).
    pub crossovers: Vec<f64>,
}

const TIE_TOL: f64 = 1e-14;

pub fn compare_curves(a: &SensitivityCurve, b: &SensitivityCurve) -> Result<DominanceReport> {
    if a.delta_grid.len() != b.delta_grid.len()
        || a
            .delta_grid
            .iter()
            .zip(&b.delta_grid)
            .any(|(x, y)| (x - y).abs() > 1e-12)
    {
        return Err(GeoError::GridMismatch(format!(
            "curves '{}' and '{}' use different grids",
            a.gate_name, b.gate_name
        )));
    }
    let diffs: Vec<f64> = a
        .infidelity
        .iter()
        .zip(&b.infidelity)
        .map(|(x, y)| x - y)
        .collect();
    let ties: Vec<bool> = diffs.iter().map(|d| d.abs() <= TIE_TOL).collect();
    let pointwise_le: Vec<bool> = diffs.iter().map(|d| *d <= TIE_TOL).collect();
    let dominates = pointwise_le.iter().all(|&x| x);
    let strictly_dominates = dominates && ties.iter().any(|&t| !t);
    let max_ratio = a
        .infidelity
        .iter()
        .zip(&b.infidelity)
        .filter(|(_, y)| **y > 0.0)
        .map(|(x, y)| x / y)
        .fold(0.0, f64::max);
    let mut crossovers = Vec::new();
    for i in 1..diffs.len() {
        let (d0, d1) = (diffs[i - 1], diffs[i]);
        if (d0 > TIE_TOL && d1 < -TIE_TOL) || (d0 < -TIE_TOL && d1 > TIE_TOL) {
            let (x0, x1) = (a.delta_grid[i - 1], a.delta_grid[i]);
            crossovers.push(x0 + (x1 - x0) * d0 / (d0 - d1));
        }
    }
    Ok(DominanceReport {
        pointwise_le,
        ties,
        dominates,
        strictly_dominates,
        max_ratio,
        crossovers,
    })
}

/// Writes `delta,infidelity`.
pub fn write_curve_csv<W: Write>(curve: &SensitivityCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta", "infidelity"])?;
    for (d, v) in curve.delta_grid.iter().zip(&curve.infidelity) {
        w.write_record(&[format!("{d}"), format!("{v}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::pauli;
    use num_complex::Complex64 as C64;

    fn curve(v: &[f64]) -> SensitivityCurve {
        SensitivityCurve {
            gate_name: "c".into(),
            delta_grid: symmetric_grid(0.1, v.len()),
            infidelity: v.to_vec(),
        }
    }

    #[test]
    fn fidelity_examples() {
        let u = pauli::y().scale(C64::new(0.0, -1.0));
        assert!((gate_fidelity(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        let x_pi = pauli::x().scale(C64::new(0.0, -1.0));
        assert!(gate_fidelity(&x_pi, &ComplexMatrix::identity(2)).unwrap().abs() < 1e-15);
        assert!(gate_fidelity(&x_pi, &ComplexMatrix::identity(3)).is_err());
    }

    #[test]
    fn fidelity_phase_conventions() {
        let u = pauli::x();
        let v = u.scale(C64::from_polar(1.0, 2.0));
        assert!((gate_fidelity(&u, &v).unwrap() - 1.0).abs() < 1e-15);
        let re = gate_fidelity_with(&u, &v, FidelityKind::RealPart).unwrap();
        assert!((re - 2f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn grid_shape() {
        let g = default_delta_grid();
        assert_eq!(g.len(), 41);
        assert_eq!(g[20], 0.0);
        assert!((g[0] + 0.1).abs() < 1e-15 && (g[40] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn compare_self_is_all_ties() {
        let c = curve(&[0.3, 0.1, 0.0, 0.1, 0.3]);
        let r = compare_curves(&c, &c).unwrap();
        assert!(r.dominates && !r.strictly_dominates);
        assert!(r.ties.iter().all(|&t| t));
        assert!(r.crossovers.is_empty());
    }

    #[test]
    fn compare_zero_against_positive() {
        let z = curve(&[0.0; 5]);
        let p = curve(&[0.3, 0.1, 0.01, 0.1, 0.3]);
        let r = compare_curves(&z, &p).unwrap();
        assert!(r.strictly_dominates);
        assert_eq!(r.max_ratio, 0.0);
        let back = compare_curves(&p, &z).unwrap();
        assert!(!back.dominates);
    }

    #[test]
    fn crossover_location() {
        let a = curve(&[0.0, 0.0, 0.2]);
        let b = curve(&[0.1, 0.1, 0.1]);
        let r = compare_curves(&a, &b).unwrap();
        assert_eq!(r.crossovers.len(), 1);
        assert!((r.crossovers[0] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch() {
        let a = curve(&[0.0; 3]);
        let b = curve(&[0.0; 5]);
        assert!(matches!(compare_curves(&a, &b), Err(GeoError::GridMismatch(_))));
    }

    #[test]
    fn error_kind_parse() {
        assert_eq!("detuning".parse::<ErrorKind>().unwrap(), ErrorKind::Detuning);
        assert!(matches!("bogus".parse::<ErrorKind>(), Err(GeoError::Lookup(_))));
    }
}
