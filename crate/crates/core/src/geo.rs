//! Bloch-sphere loops built from longitude and latitude arcs, the gates they
//! implement, and their translation into pulse schedules.
//!
//! A state `cos(χ/2)|0⟩ + sin(χ/2)e^{iξ}|1⟩` is moved along meridians by a
//! resonant drive with phase `ξ ± π/2`, and along parallels by a drive whose
//! phase follows `ξ(t)` while the detuning obeys `Δ = −ξ̇ sin²χ`. Both keep the
//! field orthogonal to the Bloch vector, so no dynamical phase is collected and
//! the loop's phase is purely geometric.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::numkit::{pauli, propagate_observed, ComplexMatrix, Integrator, TimeGrid};
use crate::pulse::{
    inject, propagate_schedule, two_level_hamiltonian, Envelope, PulseSchedule, PulseSegment,
    SegmentStepping,
};
use crate::robustness::ErrorModel;

const ANGLE_TOL: f64 = 1e-9;
/// `|cos χ|` below this counts as the equator.
const EQUATOR_TOL: f64 = 1e-12;
const POLE_TOL: f64 = 1e-12;

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut r = x.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

fn same_angle(a: f64, b: f64) -> bool {
    wrap_angle(a - b).abs() < ANGLE_TOL
}

fn at_pole(chi: f64) -> bool {
    chi.sin().abs() < POLE_TOL
}

/// Rotation axis `n = (sin χ₀ cos ξ₀, sin χ₀ sin ξ₀, cos χ₀)` and phase `γ_g` of
/// `U = cos γ_g · I + i sin γ_g · n·σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub chi0: f64,
    pub xi0: f64,
    pub gamma: f64,
}

impl GateParams {
    pub fn new(chi0: f64, xi0: f64, gamma: f64) -> Result<Self> {
        let p = Self { chi0, xi0, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi0.is_finite() && self.xi0.is_finite() && self.gamma.is_finite()) {
            return Err(GeoError::Parameter("non-finite gate parameter".into()));
        }
        if !(0.0..=PI).contains(&self.chi0) {
            return Err(GeoError::Parameter(format!("chi0 = {} outside [0, pi]", self.chi0)));
        }
        Ok(())
    }

    pub fn unitary(&self) -> ComplexMatrix {
        gate_unitary(self)
    }

    /// The evolution state `|Ψ₁⟩ = cos(χ₀/2)|0⟩ + sin(χ₀/2)e^{iξ₀}|1⟩`.
    pub fn psi1(&self) -> [C64; 2] {
        bloch_state(self.chi0, self.xi0)
    }
}

pub fn bloch_state(chi: f64, xi: f64) -> [C64; 2] {
    [
        C64::new((0.5 * chi).cos(), 0.0),
        C64::from_polar((0.5 * chi).sin(), xi),
    ]
}

pub fn gate_unitary(p: &GateParams) -> ComplexMatrix {
    let (s, c) = p.gamma.sin_cos();
    let n = [
        p.chi0.sin() * p.xi0.cos(),
        p.chi0.sin() * p.xi0.sin(),
        p.chi0.cos(),
    ];
    let ns = &(&pauli::x().scale_re(n[0]) + &pauli::y().scale_re(n[1])) + &pauli::z().scale_re(n[2]);
    &ComplexMatrix::identity(2).scale_re(c) + &ns.scale(C64::new(0.0, s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// Which of the two equivalent geometric phases (`θ/2` or `θ/2 + π`) to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PhaseBranch {
    #[default]
    Half,
    HalfPlusPi,
}

pub fn gate_params_for(axis: Axis, theta: f64, branch: PhaseBranch) -> GateParams {
    let xi0 = match (axis, theta < 0.0) {
        (Axis::X, false) => PI,
        (Axis::X, true) => 0.0,
        (Axis::Y, false) => -FRAC_PI_2,
        (Axis::Y, true) => FRAC_PI_2,
    };
    let mut gamma = 0.5 * theta.abs();
    if branch == PhaseBranch::HalfPlusPi {
        gamma += PI;
    }
    GateParams {
        chi0: FRAC_PI_2,
        xi0,
        gamma,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    Longitude,
    Latitude,
}

impl SegmentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentKind::Longitude => "longitude",
            SegmentKind::Latitude => "latitude",
        }
    }
}

/// Drive realization of a latitude arc, chosen so that the pulse area is
/// nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatitudeBranch {
    /// `φ = ξ + π`, phase slope `+1/(sin χ cos χ)`.
    Leading,
    /// `φ = ξ`, phase slope `−1/(sin χ cos χ)`.
    Trailing,
    /// Zero span or pole: a zero-duration frame jump.
    Jump,
}

/// Closed loop of waypoints `(χᵢ, ξᵢ)` joined by meridian or parallel arcs.
///
/// `ξ` values are unwrapped: a latitude arc covers exactly `ξ_{i+1} − ξᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub waypoints: Vec<(f64, f64)>,
    pub segment_kinds: Vec<SegmentKind>,
    /// One entry per segment; `None` for longitudes.
    pub branch_flags: Vec<Option<LatitudeBranch>>,
}

impl TrajectorySpec {
    pub fn new(waypoints: Vec<(f64, f64)>, segment_kinds: Vec<SegmentKind>) -> Result<Self> {
        if waypoints.len() != segment_kinds.len() + 1 {
            return Err(GeoError::Parameter(format!(
                "{} waypoints for {} segments",
                waypoints.len(),
                segment_kinds.len()
            )));
        }
        let branch_flags = segment_kinds
            .iter()
            .zip(waypoints.windows(2))
            .map(|(k, w)| match k {
                SegmentKind::Longitude => None,
                SegmentKind::Latitude => Some(latitude_branch(w[0].0, w[1].1 - w[0].1)),
            })
            .collect();
        let t = Self {
            waypoints,
            segment_kinds,
            branch_flags,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.waypoints.first();
        let last = self.waypoints.last();
        let (Some(&(c0, x0)), Some(&(cn, xn))) = (first, last) else {
            return Err(GeoError::Topology("empty trajectory".into()));
        };
        for &(chi, xi) in &self.waypoints {
            if !chi.is_finite() || !xi.is_finite() || !(0.0..=PI).contains(&chi) {
                return Err(GeoError::Parameter(format!("waypoint ({chi}, {xi}) invalid")));
            }
        }
        if (c0 - cn).abs() > ANGLE_TOL || (!at_pole(c0) && !same_angle(x0, xn)) {
            return Err(GeoError::Topology(format!(
                "trajectory is open: starts at ({c0}, {x0}), ends at ({cn}, {xn})"
            )));
        }
        for (i, (kind, w)) in self.segment_kinds.iter().zip(self.waypoints.windows(2)).enumerate() {
            let ((ca, xa), (cb, xb)) = (w[0], w[1]);
            match kind {
                SegmentKind::Longitude => {
                    if !at_pole(ca) && !at_pole(cb) && !same_angle(xa, xb) {
                        return Err(GeoError::Topology(format!(
                            "longitude segment {i} changes xi from {xa} to {xb}"
                        )));
                    }
                }
                SegmentKind::Latitude => {
                    if (ca - cb).abs() > ANGLE_TOL {
                        return Err(GeoError::Topology(format!(
                            "latitude segment {i} changes chi from {ca} to {cb}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn start(&self) -> (f64, f64) {
        self.waypoints[0]
    }

    /// Gate implemented by traversing the loop from its first waypoint.
    pub fn gate_params(&self) -> GateParams {
        let (chi0, xi0) = self.start();
        GateParams {
            chi0,
            xi0,
            gamma: geometric_phase(self).unwrap_or(0.0),
        }
    }

    /// Pulse area of each segment.
    pub fn areas(&self) -> Vec<f64> {
        self.segment_kinds
            .iter()
            .zip(self.waypoints.windows(2))
            .map(|(k, w)| match k {
                SegmentKind::Longitude => (w[1].0 - w[0].0).abs(),
                SegmentKind::Latitude => {
                    let k = w[0].0.sin() * w[0].0.cos();
                    if at_pole(w[0].0) {
                        0.0
                    } else {
                        ((w[1].1 - w[0].1) * k).abs()
                    }
                }
            })
            .collect()
    }
}

fn latitude_branch(chi: f64, dxi: f64) -> LatitudeBranch {
    let k = chi.sin() * chi.cos();
    if at_pole(chi) || dxi == 0.0 {
        LatitudeBranch::Jump
    } else if dxi * k > 0.0 {
        LatitudeBranch::Leading
    } else {
        LatitudeBranch::Trailing
    }
}

/// `−Δξ(1 − cos χ)/2` for one parallel arc.
pub fn latitude_phase(chi: f64, dxi: f64) -> f64 {
    -dxi * (1.0 - chi.cos()) / 2.0
}

/// Geometric phase of a closed loop (not reduced modulo 2π).
pub fn geometric_phase(traj: &TrajectorySpec) -> Result<f64> {
    traj.validate()?;
    Ok(traj
        .segment_kinds
        .iter()
        .zip(traj.waypoints.windows(2))
        .filter(|(k, _)| **k == SegmentKind::Latitude)
        .map(|(_, w)| latitude_phase(w[0].0, w[1].1 - w[0].1))
        .sum())
}

/// Pulse realization of a loop with every segment at peak amplitude `omega_max`.
pub fn synth_n_segment(
    traj: &TrajectorySpec,
    omega_max: f64,
    envelope: Envelope,
) -> Result<PulseSchedule> {
    traj.validate()?;
    if !(omega_max > 0.0) || !omega_max.is_finite() {
        return Err(GeoError::Parameter(format!("omega_max must be positive, got {omega_max}")));
    }
    let mut segments = Vec::with_capacity(traj.segment_kinds.len());
    for (kind, w) in traj.segment_kinds.iter().zip(traj.waypoints.windows(2)) {
        let ((ca, xa), (cb, xb)) = (w[0], w[1]);
        let seg = match kind {
            SegmentKind::Longitude => {
                let xi = if at_pole(ca) { xb } else { xa };
                let area = (cb - ca).abs();
                let phase = if cb < ca { xi - FRAC_PI_2 } else { xi + FRAC_PI_2 };
                if area == 0.0 {
                    PulseSegment::degenerate(phase, 0.0)
                } else {
                    PulseSegment::with_peak(area, omega_max, envelope, phase, 0.0, 0.0)?
                }
            }
            SegmentKind::Latitude => {
                let dxi = xb - xa;
                if ca.cos().abs() < EQUATOR_TOL && dxi != 0.0 {
                    return Err(GeoError::SingularDrift { chi: ca });
                }
                let k = ca.sin() * ca.cos();
                match latitude_branch(ca, dxi) {
                    LatitudeBranch::Jump => PulseSegment::degenerate(xa, 0.0),
                    LatitudeBranch::Leading => PulseSegment::with_peak(
                        dxi * k,
                        omega_max,
                        envelope,
                        xa + PI,
                        1.0 / k,
                        -ca.tan(),
                    )?,
                    LatitudeBranch::Trailing => PulseSegment::with_peak(
                        -dxi * k,
                        omega_max,
                        envelope,
                        xa,
                        -1.0 / k,
                        ca.tan(),
                    )?,
                }
            }
        };
        segments.push(seg);
    }
    PulseSchedule::new(segments, omega_max)
}

/// Which solution of `ξ₂ − ξ₀ = 2γ/(cos χ₁ − cos χ₃)` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum XiBranch {
    /// `γ` reduced to `(−π, π]`.
    #[default]
    Shortest,
    /// The reduced `γ` shifted by `∓2π`.
    Alternate,
    /// `γ` exactly as given, without reduction.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SynthOptions {
    pub envelope: Envelope,
    pub xi_branch: XiBranch,
}

/// The loop `P₀ → (χ₁, ξ₀) → (χ₁, ξ₂) → (χ₃, ξ₂) → (χ₃, ξ₀) → P₀`.
pub fn five_segment_loop(
    p: &GateParams,
    chi1: f64,
    chi3: f64,
    branch: XiBranch,
) -> Result<TrajectorySpec> {
    p.validate()?;
    if !(0.0 <= chi1 && chi1 <= p.chi0 && p.chi0 <= chi3 && chi3 <= PI) {
        return Err(GeoError::Parameter(format!(
            "need 0 <= chi1 <= chi0 <= chi3 <= pi, got chi1 = {chi1}, chi0 = {}, chi3 = {chi3}",
            p.chi0
        )));
    }
    let dc = chi1.cos() - chi3.cos();
    if dc.abs() < 1e-12 {
        return Err(GeoError::DegenerateLoop);
    }
    let mut gamma = wrap_angle(p.gamma);
    match branch {
        XiBranch::Shortest => {}
        XiBranch::Alternate => gamma -= TAU.copysign(gamma),
        XiBranch::Literal => gamma = p.gamma,
    }
    let xi0 = p.xi0;
    let xi2 = xi0 + 2.0 * gamma / dc;
    if xi2 != xi0 {
        for chi in [chi1, chi3] {
            if chi.cos().abs() < EQUATOR_TOL {
                return Err(GeoError::SingularDrift { chi });
            }
        }
    }
    use SegmentKind::{Latitude, Longitude};
    TrajectorySpec::new(
        vec![
            (p.chi0, xi0),
            (chi1, xi0),
            (chi1, xi2),
            (chi3, xi2),
            (chi3, xi0),
            (p.chi0, xi0),
        ],
        vec![Longitude, Latitude, Longitude, Latitude, Longitude],
    )
}

pub fn synth_five_segment(
    p: &GateParams,
    chi1: f64,
    chi3: f64,
    omega_max: f64,
) -> Result<(PulseSchedule, TrajectorySpec)> {
    synth_five_segment_with(p, chi1, chi3, omega_max, SynthOptions::default())
}

pub fn synth_five_segment_with(
    p: &GateParams,
    chi1: f64,
    chi3: f64,
    omega_max: f64,
    opts: SynthOptions,
) -> Result<(PulseSchedule, TrajectorySpec)> {
    let traj = five_segment_loop(p, chi1, chi3, opts.xi_branch)?;
    let sched = synth_n_segment(&traj, omega_max, opts.envelope)?;
    Ok((sched, traj))
}

/// Pole-to-pole loop: up the meridian to the north pole, down the meridian
/// `ξ₀ + γ` to the south pole and back up to `P₀`.
pub fn three_segment_loop(p: &GateParams) -> Result<TrajectorySpec> {
    five_segment_loop(p, 0.0, PI, XiBranch::Shortest)
}

/// Like the three-segment loop, but the descent stops at `χ₂` and returns along
/// that parallel. `χ₂ = π` recovers the three-segment loop.
pub fn four_segment_loop(p: &GateParams, chi2: f64) -> Result<TrajectorySpec> {
    five_segment_loop(p, 0.0, chi2, XiBranch::Shortest)
}

/// `(χ, ξ)` of a state vector; `ξ` is set to 0 at the poles.
pub fn bloch_coordinates(state: [C64; 2]) -> Result<(f64, f64)> {
    let (a0, a1) = (state[0].norm(), state[1].norm());
    let norm = a0.hypot(a1);
    if !(norm > 0.0) {
        return Err(GeoError::Domain("zero state vector".into()));
    }
    let chi = 2.0 * a1.atan2(a0);
    let xi = if a0 / norm < POLE_TOL || a1 / norm < POLE_TOL {
        0.0
    } else {
        wrap_angle(state[1].arg() - state[0].arg())
    };
    Ok((chi, xi))
}

fn apply2(u: &ComplexMatrix, v: &[C64; 2]) -> [C64; 2] {
    [
        u[(0, 0)] * v[0] + u[(0, 1)] * v[1],
        u[(1, 0)] * v[0] + u[(1, 1)] * v[1],
    ]
}

fn expect2(h: &ComplexMatrix, v: &[C64; 2]) -> f64 {
    let hv = apply2(h, v);
    (v[0].conj() * hv[0] + v[1].conj() * hv[1]).re
}

/// `γ_d = −∫⟨Ψ₁(t)|H(t)|Ψ₁(t)⟩dt` along the error-free evolution of `|Ψ₁(0)⟩`.
///
/// Each segment is integrated with Simpson's rule on a 2000-step grid.
pub fn dynamical_phase_check(schedule: &PulseSchedule, p: &GateParams) -> Result<f64> {
    const STEPS: usize = 2000;
    let none = ErrorModel::default();
    let mut psi = p.psi1();
    let mut gamma_d = 0.0;
    for seg in &schedule.segments {
        if seg.is_degenerate() {
            continue;
        }
        let ham = |s: f64| {
            two_level_hamiltonian(&inject(seg, s, schedule.omega_max, schedule.drag, &none))
        };
        let dt = seg.duration / STEPS as f64;
        let start = psi;
        let mut values = Vec::with_capacity(STEPS + 1);
        values.push(expect2(&ham(0.0), &start));
        let grid = TimeGrid::fixed(0.0, seg.duration, STEPS)?;
        let u = propagate_observed(|s| Ok(ham(s)), &grid, Integrator::Magnus4, |s, u| {
            values.push(expect2(&ham(s.min(seg.duration)), &apply2(u, &start)));
        })?;
        let mut sum = values[0] + values[STEPS];
        for (i, v) in values.iter().enumerate().take(STEPS).skip(1) {
            sum += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        gamma_d -= sum * dt / 3.0;
        psi = apply2(&u, &start);
    }
    Ok(gamma_d)
}

/// Overall, dynamical and geometric phase collected by `|Ψ₁⟩` over a loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseAccumulation {
    /// `arg⟨Ψ₁|U|Ψ₁⟩`, in `(−π, π]`.
    pub gamma: f64,
    pub gamma_d: f64,
    pub gamma_g: f64,
}

impl PhaseAccumulation {
    /// `γ − γ_d − γ_g` reduced to `(−π, π]`.
    pub fn residual(&self) -> f64 {
        wrap_angle(self.gamma - self.gamma_d - self.gamma_g)
    }
}

pub fn phase_accumulation(
    schedule: &PulseSchedule,
    traj: &TrajectorySpec,
    stepping: &SegmentStepping,
) -> Result<PhaseAccumulation> {
    let p = traj.gate_params();
    let u = propagate_schedule(schedule, &ErrorModel::default(), stepping)?;
    let psi = p.psi1();
    let upsi = apply2(&u, &psi);
    let overlap = psi[0].conj() * upsi[0] + psi[1].conj() * upsi[1];
    Ok(PhaseAccumulation {
        gamma: overlap.arg(),
        gamma_d: dynamical_phase_check(schedule, &p)?,
        gamma_g: p.gamma,
    })
}

/// Bloch coordinates of the propagated `|Ψ₁⟩` after each segment, starting
/// with the initial point.
pub fn trace_waypoints(
    schedule: &PulseSchedule,
    start: (f64, f64),
    stepping: &SegmentStepping,
) -> Result<Vec<(f64, f64)>> {
    let none = ErrorModel::default();
    let mut psi = bloch_state(start.0, start.1);
    let mut out = vec![bloch_coordinates(psi)?];
    for seg in &schedule.segments {
        let u = crate::pulse::propagate_segment(seg, schedule.omega_max, schedule.drag, &none, stepping)?;
        psi = apply2(&u, &psi);
        out.push(bloch_coordinates(psi)?);
    }
    Ok(out)
}

/// CSV `segment,kind,chi,xi_start,xi_end,area,detune_factor`.
///
/// `chi` is the parallel of a latitude arc or the end point of a meridian arc.
pub fn write_trajectory_csv<W: Write>(
    traj: &TrajectorySpec,
    schedule: &PulseSchedule,
    out: W,
) -> Result<()> {
    if schedule.segments.len() != traj.segment_kinds.len() {
        return Err(GeoError::Dimension(format!(
            "{} segments in schedule, {} in trajectory",
            schedule.segments.len(),
            traj.segment_kinds.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["segment", "kind", "chi", "xi_start", "xi_end", "area", "detune_factor"])?;
    for (i, ((kind, pts), seg)) in traj
        .segment_kinds
        .iter()
        .zip(traj.waypoints.windows(2))
        .zip(&schedule.segments)
        .enumerate()
    {
        w.write_record([
            i.to_string(),
            kind.as_str().to_string(),
            pts[1].0.to_string(),
            pts[0].1.to_string(),
            pts[1].1.to_string(),
            seg.area.to_string(),
            seg.detune_factor.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::distance_up_to_phase;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn propagated(s: &PulseSchedule) -> ComplexMatrix {
        propagate_schedule(s, &ErrorModel::default(), &SegmentStepping::default()).unwrap()
    }

    #[test]
    fn gate_map_examples() {
        let x = gate_unitary(&GateParams::new(FRAC_PI_2, PI, FRAC_PI_2).unwrap());
        let want = ComplexMatrix::mat2(c(0.0, 0.0), c(0.0, -1.0), c(0.0, -1.0), c(0.0, 0.0));
        assert!((&x - &want).max_norm() < 1e-15);

        let h = gate_unitary(&GateParams::new(FRAC_PI_4, 0.0, FRAC_PI_2).unwrap());
        let r = FRAC_1_SQRT_2;
        let want = ComplexMatrix::mat2(c(0.0, r), c(0.0, r), c(0.0, r), c(0.0, -r));
        assert!((&h - &want).max_norm() < 1e-15);

        let id = gate_unitary(&GateParams::new(1.1, -0.4, 0.0).unwrap());
        assert!((&id - &ComplexMatrix::identity(2)).max_norm() < 1e-15);
        assert!(GateParams::new(3.2, 0.0, 0.0).is_err());
    }

    #[test]
    fn params_for_axes() {
        let p = gate_params_for(Axis::X, PI, PhaseBranch::Half);
        assert_eq!((p.chi0, p.xi0, p.gamma), (FRAC_PI_2, PI, FRAC_PI_2));
        let p = gate_params_for(Axis::X, -FRAC_PI_2, PhaseBranch::Half);
        assert_eq!((p.chi0, p.xi0, p.gamma), (FRAC_PI_2, 0.0, FRAC_PI_4));
        let p = gate_params_for(Axis::Y, FRAC_PI_2, PhaseBranch::HalfPlusPi);
        assert_eq!((p.chi0, p.xi0, p.gamma), (FRAC_PI_2, -FRAC_PI_2, FRAC_PI_4 + PI));
        // both branches give the same gate up to a sign
        let a = gate_unitary(&gate_params_for(Axis::Y, 1.0, PhaseBranch::Half));
        let b = gate_unitary(&gate_params_for(Axis::Y, 1.0, PhaseBranch::HalfPlusPi));
        assert!(distance_up_to_phase(&a, &b).unwrap().value < 1e-15);
    }

    #[test]
    fn phase_of_simple_loops() {
        use SegmentKind::*;
        // half the equator, then back over the north pole
        let t = TrajectorySpec::new(
            vec![(FRAC_PI_2, 0.0), (FRAC_PI_2, PI), (0.0, PI), (0.0, 0.0), (FRAC_PI_2, 0.0)],
            vec![Latitude, Longitude, Latitude, Longitude],
        )
        .unwrap();
        assert!((geometric_phase(&t).unwrap() + FRAC_PI_2).abs() < 1e-15);
        // equatorial arcs have a well-defined phase but no finite drive
        assert!(matches!(
            synth_n_segment(&t, 1.0, Envelope::Sine),
            Err(GeoError::SingularDrift { .. })
        ));

        let t = TrajectorySpec::new(
            vec![(0.7, 0.2), (0.1, 0.2), (0.7, 0.2)],
            vec![Longitude, Longitude],
        )
        .unwrap();
        assert_eq!(geometric_phase(&t).unwrap(), 0.0);

        let open = TrajectorySpec::new(vec![(0.7, 0.2), (0.1, 0.2)], vec![Longitude]);
        assert!(matches!(open, Err(GeoError::Topology(_))));
    }

    #[test]
    fn five_segment_x_pi() {
        let p = GateParams::new(FRAC_PI_2, PI, FRAC_PI_2).unwrap();
        let (s, t) = synth_five_segment(&p, 0.25 * PI, 0.75 * PI, 1.0).unwrap();
        assert!((t.waypoints[2].1 - (PI + PI * FRAC_1_SQRT_2)).abs() < 1e-12);
        let lat = PI * FRAC_1_SQRT_2 * 0.5;
        let want = [0.25 * PI, lat, 0.5 * PI, lat, 0.25 * PI];
        for (a, w) in s.segments.iter().zip(want) {
            assert!((a.area - w).abs() < 1e-12, "{} vs {w}", a.area);
        }
        let expect_gamma = (t.waypoints[2].1 - PI) * ((0.25 * PI).cos() - (0.75 * PI).cos()) / 2.0;
        assert!((geometric_phase(&t).unwrap() - expect_gamma).abs() < 1e-12);
        assert!((expect_gamma - FRAC_PI_2).abs() < 1e-12);
        let d = distance_up_to_phase(&propagated(&s), &gate_unitary(&p)).unwrap();
        assert!(d.value < 1e-6, "{}", d.value);
    }

    #[test]
    fn five_segment_hadamard() {
        let p = GateParams::new(FRAC_PI_4, 0.0, FRAC_PI_2).unwrap();
        let (s, _) = synth_five_segment(&p, 0.05 * PI, 0.73 * PI, 2.0).unwrap();
        let d = distance_up_to_phase(&propagated(&s), &gate_unitary(&p)).unwrap();
        assert!(d.value < 1e-6, "{}", d.value);
    }

    #[test]
    fn five_segment_errors() {
        let p = GateParams::new(FRAC_PI_4, 0.0, FRAC_PI_2).unwrap();
        assert!(matches!(
            synth_five_segment(&p, 0.3 * PI, 0.73 * PI, 1.0),
            Err(GeoError::Parameter(_))
        ));
        let p = GateParams::new(FRAC_PI_2, 0.0, FRAC_PI_2).unwrap();
        assert!(matches!(
            synth_five_segment(&p, FRAC_PI_2, FRAC_PI_2, 1.0),
            Err(GeoError::DegenerateLoop)
        ));
        assert!(matches!(
            synth_five_segment(&p, 0.2, FRAC_PI_2, 1.0),
            Err(GeoError::SingularDrift { .. })
        ));
    }

    #[test]
    fn collapsed_first_segment() {
        let p = GateParams::new(0.9, 0.3, 0.6).unwrap();
        let (s, _) = synth_five_segment(&p, 0.9, 2.0, 1.0).unwrap();
        assert_eq!(s.segments[0].area, 0.0);
        assert_eq!(s.segments[0].duration, 0.0);
        let d = distance_up_to_phase(&propagated(&s), &gate_unitary(&p)).unwrap();
        assert!(d.value < 1e-6);
    }

    #[test]
    fn alternate_branch_same_gate() {
        let p = GateParams::new(1.2, 0.5, 0.8).unwrap();
        let opts = SynthOptions {
            xi_branch: XiBranch::Alternate,
            ..Default::default()
        };
        let (short, _) = synth_five_segment(&p, 0.3, 2.4, 1.0).unwrap();
        let (alt, t) = synth_five_segment_with(&p, 0.3, 2.4, 1.0, opts).unwrap();
        assert!(alt.total_area() > short.total_area());
        assert!((geometric_phase(&t).unwrap() - (0.8 - TAU)).abs() < 1e-12);
        let d = distance_up_to_phase(&propagated(&alt), &gate_unitary(&p)).unwrap();
        assert!(d.value < 1e-6);
    }

    #[test]
    fn three_and_four_segment_x_pi() {
        let p = gate_params_for(Axis::X, PI, PhaseBranch::Half);
        let t3 = three_segment_loop(&p).unwrap();
        let areas = t3.areas();
        let nonzero: Vec<f64> = areas.into_iter().filter(|a| *a > 0.0).collect();
        assert_eq!(nonzero, vec![FRAC_PI_2, PI, FRAC_PI_2]);
        let s3 = synth_n_segment(&t3, 1.0, Envelope::Sine).unwrap();
        let u3 = propagated(&s3);
        assert!(distance_up_to_phase(&u3, &gate_unitary(&p)).unwrap().value < 1e-6);

        let t4 = four_segment_loop(&p, PI).unwrap();
        let s4 = synth_n_segment(&t4, 1.0, Envelope::Sine).unwrap();
        assert!((&propagated(&s4) - &u3).max_norm() < 1e-12);

        let t4 = four_segment_loop(&p, 0.8 * PI).unwrap();
        let s4 = synth_n_segment(&t4, 1.0, Envelope::Sine).unwrap();
        assert!(distance_up_to_phase(&propagated(&s4), &gate_unitary(&p)).unwrap().value < 1e-6);
    }

    #[test]
    fn single_latitude_loop() {
        let (chi0, xi0) = (1.1, 0.4);
        let t = TrajectorySpec::new(
            vec![(chi0, xi0), (chi0, xi0 + TAU)],
            vec![SegmentKind::Latitude],
        )
        .unwrap();
        let gamma = geometric_phase(&t).unwrap();
        assert!((gamma + PI * (1.0 - chi0.cos())).abs() < 1e-14);
        let s = synth_n_segment(&t, 1.0, Envelope::Sine).unwrap();
        let want = gate_unitary(&GateParams::new(chi0, xi0, gamma).unwrap());
        assert!(distance_up_to_phase(&propagated(&s), &want).unwrap().value < 1e-6);
    }

    #[test]
    fn dynamical_phase_examples() {
        let p = GateParams::new(FRAC_PI_4, 0.0, FRAC_PI_2).unwrap();
        let (s, _) = synth_five_segment(&p, 0.05 * PI, 0.73 * PI, 1.0).unwrap();
        assert!(dynamical_phase_check(&s, &p).unwrap().abs() < 1e-6);

        let x = crate::pulse::synth_conventional(
            &crate::pulse::ConventionalGateSpec::new(PI, 0.0).unwrap(),
            1.0,
        )
        .unwrap();
        // a state on the rotation axis collects −θ/2
        let on_axis = GateParams::new(FRAC_PI_2, 0.0, 0.0).unwrap();
        assert!((dynamical_phase_check(&x, &on_axis).unwrap() + FRAC_PI_2).abs() < 1e-9);
        // a state on the orthogonal great circle collects nothing
        let orth = GateParams::new(FRAC_PI_2, -FRAC_PI_2, 0.0).unwrap();
        assert!(dynamical_phase_check(&x, &orth).unwrap().abs() < 1e-9);

        let empty = PulseSchedule::empty(1.0);
        assert_eq!(dynamical_phase_check(&empty, &p).unwrap(), 0.0);
    }

    #[test]
    fn bloch_examples() {
        assert_eq!(bloch_coordinates([c(1.0, 0.0), c(0.0, 0.0)]).unwrap(), (0.0, 0.0));
        let r = FRAC_1_SQRT_2;
        let (chi, xi) = bloch_coordinates([c(r, 0.0), c(r, 0.0)]).unwrap();
        assert!((chi - FRAC_PI_2).abs() < 1e-15 && xi.abs() < 1e-15);
        let (chi, xi) = bloch_coordinates([c(r, 0.0), c(0.0, r)]).unwrap();
        assert!((chi - FRAC_PI_2).abs() < 1e-15 && (xi - FRAC_PI_2).abs() < 1e-15);
        assert!(bloch_coordinates([c(0.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn trajectory_csv() {
        let p = GateParams::new(FRAC_PI_2, PI, FRAC_PI_2).unwrap();
        let (s, t) = synth_five_segment(&p, 0.25 * PI, 0.75 * PI, 1.0).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&t, &s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "segment,kind,chi,xi_start,xi_end,area,detune_factor");
        assert_eq!(lines.len(), 6);
        assert!(lines[2].starts_with("1,latitude,"));
    }
}
