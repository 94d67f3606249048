//! Named gates and their ideal matrices.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::geo::{GateParams, XiBranch};
use crate::numkit::ComplexMatrix;
use crate::pulse::ConventionalGateSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateName {
    I,
    H,
    Xpi,
    Ypi,
    Xpi2,
    Ypi2,
    MXpi2,
    MYpi2,
    ISwap,
    Cz,
}

impl GateName {
    pub const SINGLE_QUBIT: [GateName; 8] = [
        GateName::I,
        GateName::H,
        GateName::Xpi,
        GateName::Ypi,
        GateName::Xpi2,
        GateName::Ypi2,
        GateName::MXpi2,
        GateName::MYpi2,
    ];

    pub fn is_two_qubit(self) -> bool {
        matches!(self, GateName::ISwap | GateName::Cz)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GateName::I => "I",
            GateName::H => "H",
            GateName::Xpi => "Xpi",
            GateName::Ypi => "Ypi",
            GateName::Xpi2 => "Xpi2",
            GateName::Ypi2 => "Ypi2",
            GateName::MXpi2 => "mXpi2",
            GateName::MYpi2 => "mYpi2",
            GateName::ISwap => "iSWAP",
            GateName::Cz => "CZ",
        }
    }

    /// Textbook matrix of the gate (2x2 or 4x4 in the |q1 q2⟩ computational basis).
    pub fn ideal(self) -> ComplexMatrix {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let rot = |theta: f64, phi: f64| {
            let (s, c) = (0.5 * theta).sin_cos();
            ComplexMatrix::mat2(
                C64::new(c, 0.0),
                -i * s * C64::from_polar(1.0, -phi),
                -i * s * C64::from_polar(1.0, phi),
                C64::new(c, 0.0),
            )
        };
        match self {
            GateName::I => ComplexMatrix::identity(2),
            GateName::H => {
                let r = C64::new(FRAC_1_SQRT_2, 0.0);
                ComplexMatrix::mat2(r, r, r, -r)
            }
            GateName::Xpi => rot(PI, 0.0),
            GateName::Ypi => rot(PI, FRAC_PI_2),
            GateName::Xpi2 => rot(FRAC_PI_2, 0.0),
            GateName::Ypi2 => rot(FRAC_PI_2, FRAC_PI_2),
            GateName::MXpi2 => rot(FRAC_PI_2, PI),
            GateName::MYpi2 => rot(FRAC_PI_2, -FRAC_PI_2),
            GateName::ISwap => ComplexMatrix::from_rows(&[
                vec![one, z, z, z],
                vec![z, z, i, z],
                vec![z, i, z, z],
                vec![z, z, z, one],
            ])
            .unwrap(),
            GateName::Cz => ComplexMatrix::from_diag(&[one, one, one, -one]),
        }
    }

    /// Axis angle parameters of the geometric construction `(χ₀, ξ₀, γ_g)`.
    ///
    /// Rotations use `(π/2, π)` about X and `(π/2, −π/2)` about Y with
    /// `γ_g = θ/2`; negative angles move the axis to `ξ₀ = 0` / `π/2`. Two-qubit
    /// gates return the parameters of their effective two-level loop.
    pub fn geometric_triple(self) -> (f64, f64, f64) {
        match self {
            GateName::I => (FRAC_PI_2, PI, PI),
            GateName::H => (FRAC_PI_4, 0.0, FRAC_PI_2),
            GateName::Xpi => (FRAC_PI_2, PI, FRAC_PI_2),
            GateName::Ypi => (FRAC_PI_2, -FRAC_PI_2, FRAC_PI_2),
            GateName::Xpi2 => (FRAC_PI_2, PI, FRAC_PI_4),
            GateName::Ypi2 => (FRAC_PI_2, -FRAC_PI_2, FRAC_PI_4),
            GateName::MXpi2 => (FRAC_PI_2, 0.0, FRAC_PI_4),
            GateName::MYpi2 => (FRAC_PI_2, FRAC_PI_2, FRAC_PI_4),
            GateName::ISwap => (FRAC_PI_2, 0.0, FRAC_PI_2),
            GateName::Cz => (FRAC_PI_2, 0.0, PI),
        }
    }

    /// Loops that realize this gate: `γ_g` and, for single-qubit gates, `γ_g + π`
    /// (the same gate up to a global sign), each traversed the short and the
    /// long way round.
    pub fn loop_candidates(self) -> Vec<(GateParams, XiBranch)> {
        let (chi0, xi0, gamma) = self.geometric_triple();
        let gammas: &[f64] = if self.is_two_qubit() {
            &[gamma]
        } else {
            &[gamma, gamma + PI]
        };
        let mut out = Vec::new();
        for &g in gammas {
            for b in [XiBranch::Shortest, XiBranch::Alternate] {
                out.push((
                    GateParams {
                        chi0,
                        xi0,
                        gamma: g,
                    },
                    b,
                ));
            }
        }
        out
    }
}

/// Resonant rotations realizing the conventional version of a single-qubit
/// gate, first applied first.
pub fn conventional_composite(gate: GateName) -> Result<Vec<ConventionalGateSpec>> {
    let r = |theta: f64, phi: f64| ConventionalGateSpec { theta, phi };
    Ok(match gate {
        GateName::I => vec![r(TAU, 0.0)],
        GateName::H => vec![r(PI, 0.0), r(FRAC_PI_2, -FRAC_PI_2)],
        GateName::Xpi => vec![r(PI, 0.0)],
        GateName::Ypi => vec![r(PI, FRAC_PI_2)],
        GateName::Xpi2 => vec![r(FRAC_PI_2, 0.0)],
        GateName::Ypi2 => vec![r(FRAC_PI_2, FRAC_PI_2)],
        GateName::MXpi2 => vec![r(FRAC_PI_2, PI)],
        GateName::MYpi2 => vec![r(FRAC_PI_2, -FRAC_PI_2)],
        GateName::ISwap | GateName::Cz => {
            return Err(GeoError::Lookup(format!(
                "{gate} has no single-qubit conventional composite"
            )))
        }
    })
}

impl fmt::Display for GateName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GateName {
    type Err = GeoError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "I" | "Id" | "id" => GateName::I,
            "H" | "h" => GateName::H,
            "Xpi" | "X" => GateName::Xpi,
            "Ypi" | "Y" => GateName::Ypi,
            "Xpi2" => GateName::Xpi2,
            "Ypi2" => GateName::Ypi2,
            "mXpi2" => GateName::MXpi2,
            "mYpi2" => GateName::MYpi2,
            "iSWAP" | "iswap" | "ISWAP" => GateName::ISwap,
            "CZ" | "cz" => GateName::Cz,
            other => return Err(GeoError::Lookup(format!("gate '{other}'"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for g in GateName::SINGLE_QUBIT
            .iter()
            .chain(&[GateName::ISwap, GateName::Cz])
        {
            assert_eq!(g.as_str().parse::<GateName>().unwrap(), *g);
        }
        assert!("T".parse::<GateName>().is_err());
    }

    #[test]
    fn composites_match_ideal() {
        use crate::numkit::distance_up_to_phase;
        use crate::pulse::conventional_unitary;
        for g in GateName::SINGLE_QUBIT {
            let mut u = ComplexMatrix::identity(2);
            for s in conventional_composite(g).unwrap() {
                u = conventional_unitary(s.theta, s.phi).matmul(&u);
            }
            assert!(distance_up_to_phase(&u, &g.ideal()).unwrap().value < 1e-12, "{g}");
        }
        assert!(conventional_composite(GateName::Cz).is_err());
    }

    #[test]
    fn geometric_triples_match_ideal() {
        use crate::numkit::distance_up_to_phase;
        for g in GateName::SINGLE_QUBIT {
            let (c, x, y) = g.geometric_triple();
            let u = GateParams { chi0: c, xi0: x, gamma: y }.unitary();
            assert!(distance_up_to_phase(&u, &g.ideal()).unwrap().value < 1e-12, "{g}");
            for (p, _) in g.loop_candidates() {
                assert!(distance_up_to_phase(&p.unitary(), &g.ideal()).unwrap().value < 1e-12);
            }
        }
    }

    #[test]
    fn loop_phases() {
        use crate::geo::five_segment_loop;
        let phases = |n: GateName| -> Vec<f64> {
            n.loop_candidates()
                .iter()
                .map(|(p, b)| {
                    let t = five_segment_loop(p, 0.1, 2.9, *b).unwrap();
                    crate::geo::geometric_phase(&t).unwrap() / PI
                })
                .collect()
        };
        let h = phases(GateName::H);
        for (got, want) in h.iter().zip([0.5, -1.5, -0.5, 1.5]) {
            assert!((got - want).abs() < 1e-9, "{h:?}");
        }
        let cz = phases(GateName::Cz);
        assert_eq!(cz.len(), 2);
        assert!((cz[0] - 1.0).abs() < 1e-9 && (cz[1] + 1.0).abs() < 1e-9, "{cz:?}");
    }

    #[test]
    fn ideal_gates_are_unitary() {
        for g in GateName::SINGLE_QUBIT
            .iter()
            .chain(&[GateName::ISwap, GateName::Cz])
        {
            assert!(g.ideal().is_unitary(), "{g}");
        }
    }
}
